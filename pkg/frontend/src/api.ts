/**
 * Typed client for the devicelab HTTP API. One method per endpoint, bearer
 * token on every call, and API errors rethrown as ApiError so screens can
 * show the server's own code and message inline.
 */

import type {
  ApiErrorBody,
  AssetRef,
  Consensus,
  Diff,
  Draft,
  Evidence,
  EvidenceAssetInput,
  Feature,
  Locator,
  Master,
  Matrix,
  MergeSession,
  Prompt,
  Ranking,
  Template,
} from './types.js';

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
    public readonly details: Record<string, unknown> = {},
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

async function asApiError(response: Response): Promise<ApiError> {
  let body: ApiErrorBody | null = null;
  try {
    body = (await response.json()) as ApiErrorBody;
  } catch {
    // Non-JSON error body; fall through to a bare status error.
  }
  if (body && typeof body.code === 'string') {
    return new ApiError(response.status, body.code, body.message, body.details);
  }
  return new ApiError(response.status, 'http', `HTTP ${response.status}`);
}

export class DevicelabClient {
  constructor(
    public readonly baseUrl: string,
    public token: string,
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const headers: Record<string, string> = {
      Authorization: `Bearer ${this.token}`,
    };
    let payload: string | undefined;
    if (body !== undefined) {
      headers['Content-Type'] = 'application/json';
      payload = JSON.stringify(body);
    }
    const response = await fetch(this.baseUrl + path, {
      method,
      headers,
      body: payload,
    });
    if (!response.ok) {
      throw await asApiError(response);
    }
    return (await response.json()) as T;
  }

  // ------------------------------------------------------------ catalogue

  listTemplates(): Promise<Template[]> {
    return this.request('GET', '/templates');
  }

  createTemplate(name: string, description = '', brand = ''): Promise<Template> {
    return this.request('POST', '/templates', { name, description, brand });
  }

  listFeatures(origin?: 'builtin' | 'custom'): Promise<Feature[]> {
    const query = origin ? `?origin=${origin}` : '';
    return this.request('GET', `/features${query}`);
  }

  defineCustomFeature(
    displayName: string,
    valueKind: string,
    multiplicity: string,
  ): Promise<Feature> {
    return this.request('POST', '/features', {
      display_name: displayName,
      value_kind: valueKind,
      multiplicity,
      origin: 'custom',
    });
  }

  // -------------------------------------------------------- investigation

  openDraft(templateId: string): Promise<Draft> {
    return this.request('POST', '/drafts', { template_id: templateId });
  }

  listDrafts(): Promise<Draft[]> {
    return this.request('GET', '/drafts');
  }

  getDraft(draftId: string): Promise<Draft> {
    return this.request('GET', `/drafts/${draftId}`);
  }

  addClaim(
    draftId: string,
    featureKey: string,
    value: string,
    expectedVersion?: number,
  ): Promise<Draft> {
    return this.request('POST', `/drafts/${draftId}/claims`, {
      feature_key: featureKey,
      value,
      expected_version: expectedVersion ?? null,
    });
  }

  attachEvidence(
    claimId: string,
    sourceKind: string,
    locator: Locator,
    options: { note?: string; asset?: EvidenceAssetInput; expectedVersion?: number } = {},
  ): Promise<Evidence> {
    return this.request('POST', `/claims/${claimId}/evidence`, {
      source_kind: sourceKind,
      locator,
      note: options.note ?? '',
      asset: options.asset ?? null,
      expected_version: options.expectedVersion ?? null,
    });
  }

  submitDraft(draftId: string, expectedVersion?: number): Promise<Draft> {
    return this.request('POST', `/drafts/${draftId}/submit`, {
      expected_version: expectedVersion ?? null,
    });
  }

  // ---------------------------------------------------------------- merge

  openMergeSession(templateId: string, participants: string[]): Promise<MergeSession> {
    return this.request('POST', '/merge-sessions', {
      template_id: templateId,
      participants,
    });
  }

  getMergeSession(sessionId: string): Promise<MergeSession> {
    return this.request('GET', `/merge-sessions/${sessionId}`);
  }

  decide(
    sessionId: string,
    groupId: string,
    action: 'keep' | 'remove' | 'select_evidence',
    chosenEvidence?: string[],
    expectedVersion?: number,
  ): Promise<MergeSession> {
    return this.request('POST', `/merge-sessions/${sessionId}/decisions`, {
      group_id: groupId,
      action,
      chosen_evidence: chosenEvidence ?? null,
      expected_version: expectedVersion ?? null,
    });
  }

  finalize(sessionId: string): Promise<Master> {
    return this.request('POST', `/merge-sessions/${sessionId}/finalize`, {});
  }

  // ----------------------------------------------------------- comparison

  compare(productIds: string[]): Promise<Matrix> {
    return this.request('GET', `/compare?products=${productIds.join(',')}`);
  }

  diff(productA: string, productB: string): Promise<Diff> {
    return this.request('GET', `/compare/diff?a=${productA}&b=${productB}`);
  }

  prompts(productIds: string[]): Promise<Prompt[]> {
    return this.request('GET', `/compare/prompts?products=${productIds.join(',')}`);
  }

  submitRanking(
    pollId: string,
    orderedProducts: string[],
    criterion?: string,
  ): Promise<Ranking> {
    return this.request('POST', `/polls/${pollId}/rankings`, {
      ordered_products: orderedProducts,
      criterion: criterion ?? null,
    });
  }

  consensus(pollId: string): Promise<Consensus> {
    return this.request('GET', `/polls/${pollId}/consensus`);
  }

  // ---------------------------------------------------------------- assets

  async uploadAsset(bytes: Blob | ArrayBuffer, mediaType: string): Promise<AssetRef> {
    const response = await fetch(`${this.baseUrl}/assets`, {
      method: 'POST',
      headers: {
        Authorization: `Bearer ${this.token}`,
        'Content-Type': mediaType,
      },
      body: bytes,
    });
    if (!response.ok) {
      throw await asApiError(response);
    }
    return (await response.json()) as AssetRef;
  }

  /** URL the native <video>/<img>/<a> elements can load directly. */
  assetUrl(contentHash: string): string {
    return `${this.baseUrl}/assets/${contentHash}`;
  }

  async fetchAsset(contentHash: string): Promise<Blob> {
    const response = await fetch(this.assetUrl(contentHash), {
      headers: { Authorization: `Bearer ${this.token}` },
    });
    if (!response.ok) {
      throw await asApiError(response);
    }
    return response.blob();
  }

  async exportDocument(): Promise<string> {
    const response = await fetch(`${this.baseUrl}/export`, {
      headers: { Authorization: `Bearer ${this.token}` },
    });
    if (!response.ok) {
      throw await asApiError(response);
    }
    return response.text();
  }
}
