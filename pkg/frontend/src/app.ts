/** DOM bootstrap: the only module allowed to touch the document. */

import { ApiClient } from './api.ts';
import { renderApp } from './render.ts';
import { DashboardStore, POLL_INTERVAL_MS } from './store.ts';

export function startApp(rootElement: HTMLElement, baseUrl = ''): DashboardStore {
  const store = new DashboardStore(new ApiClient(baseUrl));

  const redraw = () => {
    const feedbackBox = rootElement.querySelector<HTMLTextAreaElement>(
      '[data-role="feedback"]',
    );
    const preserved = feedbackBox?.value ?? '';
    rootElement.innerHTML = renderApp(store.view);
    const restored = rootElement.querySelector<HTMLTextAreaElement>(
      '[data-role="feedback"]',
    );
    if (restored && preserved) {
      restored.value = preserved;
      syncReviseButton(rootElement);
    }
  };

  store.subscribe(redraw);

  rootElement.addEventListener('click', (event) => {
    const target = event.target as HTMLElement;
    const action = target.dataset.action;
    if (action === 'approve') void store.approve();
    else if (action === 'skip') void store.skip();
    else if (action === 'revise') {
      const box = rootElement.querySelector<HTMLTextAreaElement>('[data-role="feedback"]');
      if (box && box.value.trim()) void store.revise(box.value.trim());
    } else if (action === 'run-next' && target.dataset.stage) {
      void store.invokeStage(target.dataset.stage);
    }

    const artifactNode = target.closest<SVGGElement & HTMLElement>('[data-artifact]');
    if (artifactNode?.dataset.artifact) {
      void store.selectLineage(artifactNode.dataset.artifact);
    }
    const docLink = target.closest<HTMLElement>('[data-doc]');
    if (docLink?.dataset.doc) {
      event.preventDefault();
      void store.selectDoc(docLink.dataset.doc);
    }
  });

  rootElement.addEventListener('input', () => syncReviseButton(rootElement));

  void store.refresh().then(() => store.poll());
  setInterval(() => void store.poll(), POLL_INTERVAL_MS);
  return store;
}

function syncReviseButton(rootElement: HTMLElement): void {
  const box = rootElement.querySelector<HTMLTextAreaElement>('[data-role="feedback"]');
  const button = rootElement.querySelector<HTMLButtonElement>('[data-action="revise"]');
  if (box && button) {
    button.disabled = box.value.trim().length === 0;
  }
}

declare global {
  interface Window {
    labflowDashboard?: DashboardStore;
  }
}

if (typeof document !== 'undefined') {
  const mount = document.getElementById('app');
  if (mount) {
    window.labflowDashboard = startApp(mount);
  }
}
