/** Pure view renderers: ViewModel in, HTML string out.
 *
 * Keeping these DOM-free makes every view testable without a browser; the
 * bootstrap layer owns the document and event wiring.
 */

import type {
  GraphNodeDto,
  GraphPayload,
  LineagePayload,
  ReviewBundleDto,
  StageRow,
  ViewModel,
} from './types.ts';

export function escapeHtml(text: string): string {
  return text
    .replaceAll('&', '&amp;')
    .replaceAll('<', '&lt;')
    .replaceAll('>', '&gt;')
    .replaceAll('"', '&quot;')
    .replaceAll("'", '&#39;');
}

export function renderBanner(view: ViewModel): string {
  if (!view.connected) {
    return (
      '<div class="banner banner-error" data-role="retry-banner">' +
      'connection lost; retrying&hellip; the view below may be stale' +
      '</div>'
    );
  }
  if (view.notice) {
    return `<div class="banner banner-notice">${escapeHtml(view.notice)}</div>`;
  }
  return '';
}

function stageRow(row: StageRow, nextStage: string | null, hasPending: boolean): string {
  const classes = ['stage-row', `state-${row.state}`];
  if (row.freshness === 'stale') classes.push('stale');
  if (row.stage === nextStage) classes.push('recommended');
  const flags: string[] = [];
  if (row.freshness === 'stale') flags.push('<span class="flag flag-stale">stale</span>');
  if (row.stage === nextStage) flags.push('<span class="flag flag-next">next</span>');
  if (row.optional) flags.push('<span class="flag flag-optional">optional</span>');
  const reviewLink =
    hasPending && row.state === 'in_review'
      ? ' <a href="#review-pane" class="review-link">review</a>'
      : '';
  return (
    `<tr class="${classes.join(' ')}" data-stage="${escapeHtml(row.stage)}">` +
    `<td class="stage-name">${escapeHtml(row.stage)}</td>` +
    `<td class="stage-state">${escapeHtml(row.state)}</td>` +
    `<td class="stage-freshness">${escapeHtml(row.freshness)}${flags.join('')}</td>` +
    `<td class="stage-actions">${reviewLink}</td>` +
    '</tr>'
  );
}

export function renderPipeline(view: ViewModel): string {
  const rows = view.stages
    .map((row) => stageRow(row, view.nextStage, view.pendingReview !== null))
    .join('');
  const runButton =
    view.nextStage && !view.pendingReview
      ? `<button data-action="run-next" data-stage="${escapeHtml(view.nextStage)}">` +
        `run ${escapeHtml(view.nextStage)}</button>`
      : '';
  return (
    '<section class="pipeline" id="pipeline">' +
    '<h2>Pipeline</h2>' +
    '<table><thead><tr><th>stage</th><th>state</th><th>freshness</th><th></th></tr></thead>' +
    `<tbody>${rows}</tbody></table>` +
    `<div class="pipeline-actions">${runButton}</div>` +
    '</section>'
  );
}

function renderGate(bundle: ReviewBundleDto): string {
  if (!bundle.gate_result) return '<p class="gate gate-na">no gate applies</p>';
  if (bundle.gate_result.passed) return '<p class="gate gate-pass">gate: pass</p>';
  const items = bundle.gate_result.blocking
    .map(
      (d) =>
        `<li>${escapeHtml(d.file)}:${d.line}${d.column ? ':' + d.column : ''} ` +
        `${escapeHtml(d.severity)}: ${escapeHtml(d.message)} [${escapeHtml(d.tool)}]</li>`,
    )
    .join('');
  return `<div class="gate gate-fail"><p>gate: fail</p><ul>${items}</ul></div>`;
}

export function renderReviewPane(view: ViewModel): string {
  const bundle = view.pendingReview;
  if (!bundle) {
    return '<section class="review" id="review-pane"><h2>Review</h2>' +
      '<p class="empty">nothing awaiting review</p></section>';
  }
  const changes = bundle.change_set.changes
    .map(
      (c) =>
        `<li class="change change-${escapeHtml(c.kind)}">` +
        `<span class="change-kind">${escapeHtml(c.kind)}</span> ` +
        `<a href="#" data-doc="${c.kind === 'doc' ? escapeHtml(c.path) : ''}">` +
        `${escapeHtml(c.path)}</a>` +
        `${c.detail ? ' <span class="change-detail">' + escapeHtml(c.detail) + '</span>' : ''}</li>`,
    )
    .join('');
  return (
    '<section class="review" id="review-pane">' +
    `<h2>Review: ${escapeHtml(bundle.stage)}</h2>` +
    `<p class="narration">${escapeHtml(bundle.narration)}</p>` +
    `<ul class="changes">${changes}</ul>` +
    renderGate(bundle) +
    '<div class="review-actions">' +
    '<button data-action="approve">approve</button>' +
    '<button data-action="skip">skip</button>' +
    '</div>' +
    '<div class="revise-box">' +
    '<textarea data-role="feedback" placeholder="feedback for revision"></textarea>' +
    '<button data-action="revise" disabled>request revision</button>' +
    '</div>' +
    '</section>'
  );
}

const LAYER_ORDER: GraphNodeDto['layer'][] = ['command', 'context', 'code', 'data'];
const NODE_W = 190;
const NODE_H = 34;
const COL_GAP = 230;
const ROW_GAP = 52;

interface Placed {
  node: GraphNodeDto;
  x: number;
  y: number;
}

function placeNodes(graph: GraphPayload): Map<string, Placed> {
  const placed = new Map<string, Placed>();
  LAYER_ORDER.forEach((layer, column) => {
    const members = graph.nodes
      .filter((n) => n.layer === layer)
      .sort((a, b) => a.id.localeCompare(b.id));
    members.forEach((node, row) => {
      placed.set(node.id, {
        node,
        x: 20 + column * COL_GAP,
        y: 24 + row * ROW_GAP,
      });
    });
  });
  return placed;
}

function nodeSvg(p: Placed): string {
  const label = escapeHtml(p.node.id);
  const classes = `node layer-${p.node.layer} fresh-${p.node.freshness}`;
  const clickable = p.node.layer === 'data' ? ` data-artifact="${escapeHtml(p.node.id)}"` : '';
  const shape =
    p.node.layer === 'data'
      ? `<ellipse cx="${p.x + NODE_W / 2}" cy="${p.y + NODE_H / 2}" rx="${NODE_W / 2}" ry="${NODE_H / 2}"/>`
      : `<rect x="${p.x}" y="${p.y}" width="${NODE_W}" height="${NODE_H}" rx="${p.node.layer === 'command' ? 4 : 10}"/>`;
  return (
    `<g class="${classes}"${clickable}>` +
    shape +
    `<text x="${p.x + NODE_W / 2}" y="${p.y + NODE_H / 2 + 4}" text-anchor="middle">${label}</text>` +
    '</g>'
  );
}

export function renderGraph(view: ViewModel): string {
  const graph = view.graph;
  if (!graph || graph.nodes.length === 0) {
    return '<section class="graph" id="graph"><h2>Dependency Graph</h2>' +
      '<p class="empty">no graph compiled yet</p></section>';
  }
  const placed = placeNodes(graph);
  const edges = graph.edges
    .map((e) => {
      const from = placed.get(e.from);
      const to = placed.get(e.to);
      if (!from || !to) return '';
      return (
        `<line class="edge kind-${escapeHtml(e.kind)}" ` +
        `x1="${from.x + NODE_W}" y1="${from.y + NODE_H / 2}" ` +
        `x2="${to.x}" y2="${to.y + NODE_H / 2}"/>`
      );
    })
    .join('');
  const nodes = [...placed.values()].map(nodeSvg).join('');
  const height = Math.max(
    ...[...placed.values()].map((p) => p.y + NODE_H + 24),
    120,
  );
  const width = 20 + LAYER_ORDER.length * COL_GAP;
  return (
    '<section class="graph" id="graph">' +
    '<h2>Dependency Graph</h2>' +
    '<p class="hint">click a data node for its lineage</p>' +
    `<svg viewBox="0 0 ${width} ${height}" width="100%" role="img">${edges}${nodes}</svg>` +
    '</section>'
  );
}

export function renderLineage(view: ViewModel): string {
  if (view.lineageError) {
    return `<section class="lineage" id="lineage"><h2>Lineage</h2>` +
      `<p class="lineage-error">${escapeHtml(view.lineageError)}</p></section>`;
  }
  const lineage = view.selectedLineage;
  if (!lineage) {
    return '<section class="lineage" id="lineage"><h2>Lineage</h2>' +
      '<p class="empty">no artifact selected</p></section>';
  }
  const rawTerminals = new Set(
    lineage.nodes.filter((n) => n.startsWith('data/raw/')),
  );
  const hops = lineage.edges
    .map(
      (e) =>
        '<li class="hop">' +
        `<span class="child">${escapeHtml(e.child)}</span>` +
        ' &#8592; ' +
        `<span class="parent${rawTerminals.has(e.parent) ? ' raw-tier' : ''}">${escapeHtml(e.parent)}</span>` +
        (e.transformation_ref
          ? ` <span class="via">via ${escapeHtml(e.transformation_ref)}</span>`
          : '') +
        '</li>',
    )
    .join('');
  const terminal = [...rawTerminals]
    .map((n) => `<span class="raw-badge">${escapeHtml(n)} (raw)</span>`)
    .join(' ');
  return (
    '<section class="lineage" id="lineage">' +
    `<h2>Lineage: ${escapeHtml(lineage.root)}</h2>` +
    (hops
      ? `<ul class="hops">${hops}</ul><p class="terminal">terminates at ${terminal}</p>`
      : '<p class="empty">raw input; nothing upstream</p>') +
    '</section>'
  );
}

export function renderDocPane(view: ViewModel): string {
  const doc = view.selectedDoc;
  if (!doc) return '';
  return (
    '<section class="doc" id="doc-pane">' +
    `<h2>${escapeHtml(doc.path)} <span class="version">v${doc.version}/${doc.head_version}</span></h2>` +
    `<pre>${escapeHtml(doc.content)}</pre>` +
    '</section>'
  );
}

export function renderApp(view: ViewModel): string {
  return (
    renderBanner(view) +
    renderPipeline(view) +
    renderReviewPane(view) +
    renderGraph(view) +
    renderLineage(view) +
    renderDocPane(view)
  );
}
