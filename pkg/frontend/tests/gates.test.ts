/**
 * Gate-mirror proofs against a live backend. At every reachable state the
 * UI gate value is compared with the server's actual verdict for the same
 * action:
 *
 *   finalize control disabled  <=>  POST finalize answers undecided-groups
 *   submit control blocked     <=>  POST submit answers missing-evidence
 *
 * The server side of each comparison is a raw fetch, so the client cannot
 * vouch for itself.
 */

import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { DevicelabClient } from '../src/api.js';
import { MergeConsole, finalizeDisabled, renderConsole, undecidedGroupIds } from '../src/merge.js';
import { InvestigationWizard, renderWizard, wizardView } from '../src/wizard.js';
import type { ApiErrorBody, Draft } from '../src/types.js';
import { rawPost, startServer, type TestServer } from './server.js';

let server: TestServer;
let adminClient: DevicelabClient;
let workerOne: DevicelabClient;
let workerTwo: DevicelabClient;

beforeAll(async () => {
  server = await startServer();
  adminClient = new DevicelabClient(server.baseUrl, server.logins.admin.token);
  workerOne = new DevicelabClient(server.baseUrl, server.logins.worker1.token);
  workerTwo = new DevicelabClient(server.baseUrl, server.logins.worker2.token);
});

afterAll(async () => {
  await server.stop();
});

function must<T>(value: T | undefined | null): T {
  expect(value).not.toBeNull();
  expect(value).toBeDefined();
  return value as T;
}

async function evidencedClaim(
  client: DevicelabClient,
  draft: Draft,
  featureKey: string,
  value: string,
): Promise<Draft> {
  const updated = await client.addClaim(draft.id, featureKey, value, draft.version);
  const claim = must(updated.claims.find((c) => c.feature_key === featureKey && !c.evidence.length));
  await client.attachEvidence(claim.id, 'web_page', {
    type: 'url',
    link: `https://example.com/${featureKey}`,
  });
  return client.getDraft(draft.id);
}

describe('finalize gate mirrors the server verdict', () => {
  it('stays disabled exactly while finalize would answer undecided-groups', async () => {
    const template = await adminClient.createTemplate('Gate Probe Camera', '', 'ProbeCo');

    // Four custom features; three claimed identically by both workers (three
    // competing groups), one by a single worker (premerged).
    const keys: string[] = [];
    for (const name of ['Gate Alpha', 'Gate Beta', 'Gate Gamma', 'Gate Delta']) {
      const feature = await workerOne.defineCustomFeature(name, 'free_text', 'multi');
      keys.push(feature.key);
    }
    const [alpha, beta, gamma, delta] = keys;

    let draftOne = await workerOne.openDraft(template.id);
    for (const key of [must(alpha), must(beta), must(gamma), must(delta)]) {
      draftOne = await evidencedClaim(workerOne, draftOne, key, 'Shared');
    }
    await workerOne.submitDraft(draftOne.id, draftOne.version);

    let draftTwo = await workerTwo.openDraft(template.id);
    for (const key of [must(alpha), must(beta), must(gamma)]) {
      draftTwo = await evidencedClaim(workerTwo, draftTwo, key, 'Shared');
    }
    await workerTwo.submitDraft(draftTwo.id, draftTwo.version);

    const console = new MergeConsole(adminClient);
    await console.open(template.id, [server.logins.admin.userId]);
    let session = must(console.session);
    expect(session.groups).toHaveLength(4);
    expect(undecidedGroupIds(session)).toHaveLength(3);

    // Walk every open state: 3 undecided, then 2, then 1, then 0.
    while (undecidedGroupIds(session).length > 0) {
      expect(finalizeDisabled(session)).toBe(true);
      expect(renderConsole(console.view())).toMatch(/id="console-finalize" disabled/);

      const probe = await rawPost(
        server.baseUrl,
        `/merge-sessions/${session.id}/finalize`,
        server.logins.admin.token,
        {},
      );
      expect(probe.status).toBe(409);
      const body = probe.body as ApiErrorBody;
      expect(body.code).toBe('undecided-groups');
      // The server names exactly the groups the UI counts as undecided.
      expect([...(body.details['groups'] as string[])].sort()).toEqual(
        [...undecidedGroupIds(session)].sort(),
      );

      const nextGroupId = must(undecidedGroupIds(session)[0]);
      const view = console.view();
      const group = must(view.groups.find((g) => g.groupId === nextGroupId));
      const anyCards = must(Object.values(group.evidenceByAuthor)[0]);
      await console.decide(nextGroupId, 'select_evidence', [must(anyCards[0]).evidenceId]);
      expect(console.lastError).toBeNull();
      session = must(console.session);
    }

    expect(finalizeDisabled(session)).toBe(false);
    expect(renderConsole(console.view())).not.toMatch(/id="console-finalize" disabled/);
    const success = await rawPost(
      server.baseUrl,
      `/merge-sessions/${session.id}/finalize`,
      server.logins.admin.token,
      {},
    );
    expect(success.status).toBe(200);

    // Once closed the control stays off, and the refusal is no longer about
    // undecided groups: the mirror held across every open state.
    await console.load(session.id);
    session = must(console.session);
    expect(session.status).toBe('finalized');
    expect(finalizeDisabled(session)).toBe(true);
    const closed = await rawPost(
      server.baseUrl,
      `/merge-sessions/${session.id}/finalize`,
      server.logins.admin.token,
      {},
    );
    expect(closed.status).toBe(409);
    expect((closed.body as ApiErrorBody).code).toBe('closed-session');
  });
});

describe('submit gate mirrors the server verdict', () => {
  it('blocks exactly while submission would answer missing-evidence', async () => {
    const template = await adminClient.createTemplate('Submit Probe Speaker', '', 'ProbeCo');
    const wizard = new InvestigationWizard(workerOne);
    await wizard.begin(template.id);
    const draftId = must(wizard.draft).id;

    async function probeSubmit(): Promise<{ status: number; body: ApiErrorBody }> {
      const probe = await rawPost(
        server.baseUrl,
        `/drafts/${draftId}/submit`,
        server.logins.worker1.token,
        {},
      );
      return { status: probe.status, body: probe.body as ApiErrorBody };
    }

    // Empty draft: the evidence gate has nothing to block, and the server's
    // refusal is a different rule entirely.
    expect(wizard.view().submitBlocked).toBe(false);
    let probe = await probeSubmit();
    expect(probe.status).toBe(400);
    expect(probe.body.code).toBe('empty-draft');

    // Three claims, no evidence yet: blocked after each, and the server
    // names exactly the claims the UI lists as bare.
    for (const [key, value] of [
      ['camera', 'true'],
      ['battery-life', '7'],
      ['companion-app', 'Fitbit app'],
    ] as const) {
      await wizard.addClaim(key, value);
      expect(wizard.lastError).toBeNull();
      const view = wizard.view();
      expect(view.submitBlocked).toBe(true);
      expect(renderWizard(view)).toMatch(/id="wizard-submit" disabled/);
      probe = await probeSubmit();
      expect(probe.status).toBe(400);
      expect(probe.body.code).toBe('missing-evidence');
      expect([...(probe.body.details['claims'] as string[])].sort()).toEqual(
        [...view.bareClaimIds].sort(),
      );
    }

    // Evidence lands claim by claim; the gate follows the remaining gaps.
    const claims = must(wizard.draft).claims.map((claim) => claim.id);
    expect(claims).toHaveLength(3);
    for (let done = 0; done < claims.length; done += 1) {
      await wizard.attachEvidence(must(claims[done]), 'web_page', {
        type: 'url',
        link: `https://example.com/evidence-${done}`,
      });
      expect(wizard.lastError).toBeNull();
      const view = wizard.view();
      const remaining = claims.slice(done + 1);
      expect(view.bareClaimIds.sort()).toEqual([...remaining].sort());
      expect(view.submitBlocked).toBe(remaining.length > 0);
      probe = await probeSubmit();
      if (remaining.length > 0) {
        expect(probe.status).toBe(400);
        expect(probe.body.code).toBe('missing-evidence');
        expect([...(probe.body.details['claims'] as string[])].sort()).toEqual(
          [...remaining].sort(),
        );
      } else {
        // Gate open; the same request the control would send succeeds.
        expect(probe.status).toBe(200);
        expect((probe.body as unknown as Draft).status).toBe('submitted');
      }
    }

    // Submitted: the control is off for a different reason, and the server
    // no longer answers missing-evidence while no claim is bare.
    const view = await wizard.resume(draftId);
    expect(view.bareClaimIds).toEqual([]);
    expect(view.submitBlocked).toBe(true);
    probe = await probeSubmit();
    expect(probe.status).toBeGreaterThanOrEqual(400);
    expect(probe.body.code).not.toBe('missing-evidence');

    // Sanity: the pure gate agrees with itself on the server's copy.
    expect(wizardView(must(wizard.draft)).submitBlocked).toBe(true);
  });
});
