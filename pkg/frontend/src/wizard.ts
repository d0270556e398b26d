/**
 * Stage 1 investigation wizard: a crowd worker walks feature -> value ->
 * evidence for one draft, one claim at a time. Every step is an immediate
 * API call; the screen is always re-rendered from the server's copy of the
 * draft, never from local bookkeeping.
 */

import { ApiError, DevicelabClient } from './api.js';
import { escapeHtml, errorLine } from './render.js';
import type { Draft, Evidence, EvidenceAssetInput, Feature, Locator } from './types.js';

export type WizardStep = 'feature' | 'value' | 'evidence';

export interface EvidenceChip {
  id: string;
  sourceKind: string;
  label: string;
  /** Set for video evidence: where the native player should start. */
  videoStart?: { contentHash: string; seconds: number };
}

export interface ClaimRow {
  id: string;
  featureKey: string;
  value: string;
  evidence: EvidenceChip[];
  bare: boolean;
}

export interface WizardView {
  draftId: string;
  status: Draft['status'];
  version: number;
  claims: ClaimRow[];
  /** Claims still lacking evidence; submission is blocked while non-empty. */
  bareClaimIds: string[];
  submitBlocked: boolean;
}

export function locatorLabel(locator: Locator): string {
  switch (locator.type) {
    case 'document_page':
      return `page ${locator.page}`;
    case 'video_timestamp':
      return `at ${locator.seconds}s`;
    case 'url':
      return locator.link ?? '';
    case 'text_quote':
      return `"${locator.quote}"`;
  }
}

function chip(evidence: Evidence): EvidenceChip {
  const built: EvidenceChip = {
    id: evidence.id,
    sourceKind: evidence.source_kind,
    label: locatorLabel(evidence.locator),
  };
  if (evidence.locator.type === 'video_timestamp' && evidence.asset) {
    built.videoStart = {
      contentHash: evidence.asset.content_hash,
      seconds: evidence.locator.seconds ?? 0,
    };
  }
  return built;
}

/** Project the server's draft into exactly what the wizard displays. */
export function wizardView(draft: Draft): WizardView {
  const claims = draft.claims.map((claim) => ({
    id: claim.id,
    featureKey: claim.feature_key,
    value: claim.value,
    evidence: claim.evidence.map(chip),
    bare: claim.evidence.length === 0,
  }));
  const bareClaimIds = claims.filter((c) => c.bare).map((c) => c.id);
  return {
    draftId: draft.id,
    status: draft.status,
    version: draft.version,
    claims,
    bareClaimIds,
    submitBlocked: bareClaimIds.length > 0 || draft.status !== 'in_progress',
  };
}

/** Which locator input the evidence step shows for a given source. */
export function locatorFieldFor(sourceKind: string): Locator['type'] {
  switch (sourceKind) {
    case 'packaging':
    case 'leaflet':
    case 'terms_and_conditions':
      return 'document_page';
    case 'promo_video':
      return 'video_timestamp';
    case 'web_page':
      return 'url';
    default:
      return 'text_quote';
  }
}

export function renderWizard(view: WizardView, error?: ApiError): string {
  const rows = view.claims
    .map((claim) => {
      const chips = claim.evidence
        .map((item) => {
          const video = item.videoStart
            ? ` data-video="${escapeHtml(item.videoStart.contentHash)}"` +
              ` data-seconds="${item.videoStart.seconds}"`
            : '';
          return (
            `<span class="evidence-chip" data-evidence="${escapeHtml(item.id)}"${video}>` +
            `${escapeHtml(item.sourceKind)}: ${escapeHtml(item.label)}</span>`
          );
        })
        .join('');
      return (
        `<li class="claim-row ${claim.bare ? 'bare' : 'backed'}" data-claim="${escapeHtml(claim.id)}">` +
        `<span class="claim-feature">${escapeHtml(claim.featureKey)}</span>` +
        `<span class="claim-value">${escapeHtml(claim.value)}</span>` +
        `<span class="claim-evidence">${chips || '<em>no evidence yet</em>'}</span>` +
        `</li>`
      );
    })
    .join('');

  const blockedNote = view.submitBlocked && view.bareClaimIds.length > 0
    ? `<div class="submit-blocked">Evidence is required on every claim before submitting:` +
      `<ul>${view.bareClaimIds.map((id) => `<li data-claim="${escapeHtml(id)}">${escapeHtml(id)}</li>`).join('')}</ul></div>`
    : '';

  return (
    `<section class="wizard" data-draft="${escapeHtml(view.draftId)}" data-version="${view.version}">` +
    `<ol class="claim-list">${rows}</ol>` +
    blockedNote +
    (error ? errorLine(error.code, error.message) : '') +
    `<button id="wizard-submit" ${view.submitBlocked ? 'disabled' : ''}>Submit draft</button>` +
    `</section>`
  );
}

/** Native playback for video evidence, seeked to the recorded timestamp. */
export function renderVideoEvidence(assetUrl: string, seconds: number): string {
  return `<video controls preload="metadata" src="${escapeHtml(assetUrl)}#t=${seconds}"></video>`;
}

export class InvestigationWizard {
  draft: Draft | null = null;
  step: WizardStep = 'feature';
  features: Feature[] = [];
  lastError: ApiError | null = null;
  /** Set when another tab moved the draft forward; offer a reload-and-retry. */
  retryPrompt = false;

  constructor(private readonly client: DevicelabClient) {}

  async begin(templateId: string): Promise<WizardView> {
    this.features = await this.client.listFeatures();
    this.draft = await this.client.openDraft(templateId);
    this.step = 'feature';
    return wizardView(this.draft);
  }

  async resume(draftId: string): Promise<WizardView> {
    this.features = await this.client.listFeatures();
    this.draft = await this.client.getDraft(draftId);
    return wizardView(this.draft);
  }

  view(): WizardView {
    if (!this.draft) {
      throw new Error('wizard has no draft yet');
    }
    return wizardView(this.draft);
  }

  private async guarded<T>(call: () => Promise<T>): Promise<T | null> {
    this.lastError = null;
    this.retryPrompt = false;
    try {
      return await call();
    } catch (error) {
      if (error instanceof ApiError) {
        this.lastError = error;
        if (error.code === 'stale-version') {
          this.retryPrompt = true;
        }
        return null;
      }
      throw error;
    }
  }

  /** Feature + value step. The server echoes the whole updated draft. */
  async addClaim(featureKey: string, value: string): Promise<WizardView> {
    if (!this.draft) {
      throw new Error('wizard has no draft yet');
    }
    const updated = await this.guarded(() =>
      this.client.addClaim(this.draft!.id, featureKey, value, this.draft!.version),
    );
    if (updated) {
      this.draft = updated;
      this.step = 'evidence';
    }
    return this.view();
  }

  async attachEvidence(
    claimId: string,
    sourceKind: string,
    locator: Locator,
    options: { note?: string; asset?: EvidenceAssetInput } = {},
  ): Promise<WizardView> {
    if (!this.draft) {
      throw new Error('wizard has no draft yet');
    }
    const attached = await this.guarded(() =>
      this.client.attachEvidence(claimId, sourceKind, locator, options),
    );
    if (attached) {
      // Evidence changed the draft version; refetch the server's copy.
      this.draft = await this.client.getDraft(this.draft.id);
      this.step = 'feature';
    }
    return this.view();
  }

  async submit(): Promise<WizardView> {
    if (!this.draft) {
      throw new Error('wizard has no draft yet');
    }
    const submitted = await this.guarded(() =>
      this.client.submitDraft(this.draft!.id, this.draft!.version),
    );
    if (submitted) {
      this.draft = submitted;
    }
    return this.view();
  }

  /** The retry path after a stale-version conflict: reload, keep going. */
  async reload(): Promise<WizardView> {
    if (!this.draft) {
      throw new Error('wizard has no draft yet');
    }
    this.draft = await this.client.getDraft(this.draft.id);
    this.retryPrompt = false;
    this.lastError = null;
    return this.view();
  }
}
