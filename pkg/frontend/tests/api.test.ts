import { describe, expect, it } from 'vitest';

import { ApiClient, ApiError } from '../src/api.ts';
import { FixtureApi } from './fixture.ts';

describe('ApiClient', () => {
  it('builds endpoint urls the server understands', async () => {
    const fixture = new FixtureApi();
    const client = new ApiClient('', fixture.fetchFn);
    await client.getSession();
    await client.getEvents(7);
    await client.getDoc('docs/01-basic-information.md', 1);
    await client.getLineage('data/output/results/metrics.json');
    expect(fixture.requestLog).toEqual([
      'GET /session',
      'GET /events?since=7',
      'GET /docs/docs/01-basic-information.md?version=1',
      'GET /lineage/data/output/results/metrics.json',
    ]);
  });

  it('maps error payloads onto ApiError', async () => {
    const fixture = new FixtureApi();
    const client = new ApiClient('', fixture.fetchFn);
    try {
      await client.review('approve');
      expect.unreachable('should have thrown');
    } catch (error) {
      expect(error).toBeInstanceOf(ApiError);
      const apiError = error as ApiError;
      expect(apiError.status).toBe(409);
      expect(apiError.errorKind).toBe('NoPendingReview');
    }
  });

  it('prefixes a base url when configured', async () => {
    const fixture = new FixtureApi();
    const client = new ApiClient('http://fixture:8787', fixture.fetchFn);
    await client.getSession();
    expect(fixture.requestLog).toEqual(['GET http://fixture:8787/session']);
  });
});
