/**
 * Stage 2 merge console: an admin walks the session's claim groups one by
 * one, in exactly the order the server produced them, picking evidence for
 * competing groups and optionally removing premerged ones. The finalize
 * control mirrors the server's own gate: it is enabled precisely when no
 * group is undecided.
 */

import { ApiError, DevicelabClient } from './api.js';
import { escapeHtml, errorLine } from './render.js';
import type { ClaimGroup, Decision, Master, MergeSession } from './types.js';

/** The groups the server would still refuse to finalize over. */
export function undecidedGroupIds(session: MergeSession): string[] {
  return session.groups
    .filter((group) => !(group.group_id in session.decisions))
    .map((group) => group.group_id);
}

/** Gate mirror: disabled exactly while finalize would be undecided-groups. */
export function finalizeDisabled(session: MergeSession): boolean {
  return session.status !== 'open' || undecidedGroupIds(session).length > 0;
}

export interface EvidenceCard {
  evidenceId: string;
  claimId: string;
  author: string;
  sourceKind: string;
  note: string;
  chosen: boolean;
}

export interface GroupView {
  groupId: string;
  featureKey: string;
  value: string;
  classification: ClaimGroup['classification'];
  decided: boolean;
  /** Premerged only: current decision is remove. */
  removed: boolean;
  /** Competing only: one card per evidence item, column per author. */
  evidenceByAuthor: Record<string, EvidenceCard[]>;
}

export interface ConsoleView {
  sessionId: string;
  status: MergeSession['status'];
  version: number;
  groups: GroupView[];
  undecided: string[];
  finalizeDisabled: boolean;
  decisionLog: Decision[];
}

function groupView(group: ClaimGroup, decision: Decision | undefined): GroupView {
  const chosen = new Set(decision?.chosen_evidence ?? []);
  const evidenceByAuthor: Record<string, EvidenceCard[]> = {};
  for (const claim of group.claims) {
    const cards = (evidenceByAuthor[claim.author] ??= []);
    for (const item of claim.evidence) {
      cards.push({
        evidenceId: item.id,
        claimId: claim.id,
        author: claim.author,
        sourceKind: item.source_kind,
        note: item.note,
        chosen: chosen.has(item.id),
      });
    }
  }
  return {
    groupId: group.group_id,
    featureKey: group.feature_key,
    value: group.value,
    classification: group.classification,
    decided: decision !== undefined,
    removed: decision?.action === 'remove',
    evidenceByAuthor,
  };
}

/** Project the server's session into exactly what the console displays. */
export function consoleView(session: MergeSession): ConsoleView {
  return {
    sessionId: session.id,
    status: session.status,
    version: session.version,
    groups: session.groups.map((group) =>
      groupView(group, session.decisions[group.group_id]),
    ),
    undecided: undecidedGroupIds(session),
    finalizeDisabled: finalizeDisabled(session),
    decisionLog: session.decision_log,
  };
}

function renderCompeting(view: GroupView): string {
  const columns = Object.entries(view.evidenceByAuthor)
    .map(([author, cards]) => {
      const rendered = cards
        .map(
          (card) =>
            `<label class="evidence-card ${card.chosen ? 'chosen' : ''}">` +
            `<input type="checkbox" data-evidence="${escapeHtml(card.evidenceId)}" ${card.chosen ? 'checked' : ''}>` +
            `${escapeHtml(card.sourceKind)}${card.note ? `: ${escapeHtml(card.note)}` : ''}` +
            `</label>`,
        )
        .join('');
      return `<div class="author-column"><h4>${escapeHtml(author)}</h4>${rendered}</div>`;
    })
    .join('');
  return (
    `<div class="evidence-comparison">${columns}</div>` +
    `<button class="pick-evidence" data-group="${escapeHtml(view.groupId)}">Use selected evidence</button>`
  );
}

function renderPremerged(view: GroupView): string {
  return (
    `<label class="remove-toggle">` +
    `<input type="checkbox" class="group-remove" data-group="${escapeHtml(view.groupId)}" ${view.removed ? 'checked' : ''}>` +
    ` remove from master</label>`
  );
}

export function renderConsole(view: ConsoleView, error?: ApiError): string {
  const groups = view.groups
    .map(
      (group) =>
        `<section class="claim-group ${group.classification} ${group.decided ? 'decided' : 'undecided'}" ` +
        `id="group-${escapeHtml(group.groupId)}">` +
        `<h3>${escapeHtml(group.featureKey)} = ${escapeHtml(group.value)}</h3>` +
        (group.classification === 'competing' ? renderCompeting(group) : renderPremerged(group)) +
        `</section>`,
    )
    .join('');

  // Server-side gate errors link straight to the groups they name.
  let errorBlock = '';
  if (error) {
    const named = (error.details['groups'] ?? error.details['values'] ?? []) as string[];
    const links = Array.isArray(named)
      ? named
          .map((item) => `<a href="#group-${escapeHtml(String(item))}">${escapeHtml(String(item))}</a>`)
          .join(' ')
      : '';
    errorBlock = errorLine(error.code, error.message) + links;
  }

  return (
    `<section class="merge-console" data-session="${escapeHtml(view.sessionId)}" data-version="${view.version}">` +
    groups +
    errorBlock +
    `<button id="console-finalize" ${view.finalizeDisabled ? 'disabled' : ''}>Finalize master</button>` +
    `</section>`
  );
}

/** Finalized masters render read-only; values come verbatim from the server. */
export function renderMaster(master: Master): string {
  const rows = master.entries
    .map(
      (entry) =>
        `<tr><td>${escapeHtml(entry.feature_key)}</td><td>${escapeHtml(entry.value)}</td>` +
        `<td>${entry.evidence.length}</td><td>${escapeHtml(entry.authors.join(', '))}</td></tr>`,
    )
    .join('');
  return (
    `<table class="master-profile" data-template="${escapeHtml(master.template_id)}">` +
    `<thead><tr><th>feature</th><th>value</th><th>evidence</th><th>authors</th></tr></thead>` +
    `<tbody>${rows}</tbody></table>`
  );
}

export class MergeConsole {
  session: MergeSession | null = null;
  master: Master | null = null;
  lastError: ApiError | null = null;

  constructor(private readonly client: DevicelabClient) {}

  async open(templateId: string, participants: string[]): Promise<ConsoleView> {
    this.session = await this.client.openMergeSession(templateId, participants);
    return consoleView(this.session);
  }

  async load(sessionId: string): Promise<ConsoleView> {
    this.session = await this.client.getMergeSession(sessionId);
    return consoleView(this.session);
  }

  view(): ConsoleView {
    if (!this.session) {
      throw new Error('console has no session yet');
    }
    return consoleView(this.session);
  }

  private async guarded<T>(call: () => Promise<T>): Promise<T | null> {
    this.lastError = null;
    try {
      return await call();
    } catch (error) {
      if (error instanceof ApiError) {
        this.lastError = error;
        if (error.code === 'stale-version' || error.code === 'conflict') {
          // A teammate decided concurrently; pick up their decision log.
          await this.load(this.session!.id);
        }
        return null;
      }
      throw error;
    }
  }

  async decide(
    groupId: string,
    action: 'keep' | 'remove' | 'select_evidence',
    chosenEvidence?: string[],
  ): Promise<ConsoleView> {
    if (!this.session) {
      throw new Error('console has no session yet');
    }
    const updated = await this.guarded(() =>
      this.client.decide(this.session!.id, groupId, action, chosenEvidence, this.session!.version),
    );
    if (updated) {
      this.session = updated;
    }
    return this.view();
  }

  async finalize(): Promise<ConsoleView> {
    if (!this.session) {
      throw new Error('console has no session yet');
    }
    const master = await this.guarded(() => this.client.finalize(this.session!.id));
    if (master) {
      this.master = master;
      await this.load(this.session.id);
    }
    return this.view();
  }
}
