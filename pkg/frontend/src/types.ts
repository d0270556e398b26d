/**
 * Wire types for the devicelab HTTP API, transcribed field-for-field from
 * the server's JSON encoders. The client never reshapes these beyond
 * building view models; whatever the server said is what gets displayed.
 */

export type RoleName = 'crowd_worker' | 'admin' | 'student';

export interface ApiErrorBody {
  code: string;
  message: string;
  details: Record<string, unknown>;
}

export interface Template {
  id: string;
  name: string;
  description: string;
  brand: string;
  created_by: string;
  status: 'open' | 'merged';
}

export interface Feature {
  key: string;
  display_name: string;
  value_kind: 'boolean' | 'numeric' | 'free_text' | 'choice';
  multiplicity: 'single' | 'multi';
  choices: string[] | null;
  origin: 'builtin' | 'custom';
  created_by: string | null;
}

/** One of the four locator variants; `type` discriminates. */
export interface Locator {
  type: 'document_page' | 'video_timestamp' | 'url' | 'text_quote';
  page?: number;
  seconds?: number;
  link?: string;
  quote?: string;
}

export interface AssetRef {
  content_hash: string;
  media_type: string;
  size_bytes: number;
}

export interface Evidence {
  id: string;
  source_kind: string;
  locator: Locator;
  asset: AssetRef | null;
  note: string;
}

export interface Claim {
  id: string;
  feature_key: string;
  value: string;
  author: string;
  evidence: Evidence[];
}

export interface Draft {
  id: string;
  template_id: string;
  worker: string;
  status: 'in_progress' | 'submitted';
  version: number;
  claims: Claim[];
}

export interface GroupClaim extends Claim {
  draft_id: string;
}

export interface ClaimGroup {
  group_id: string;
  feature_key: string;
  value: string;
  classification: 'premerged' | 'competing';
  authors: string[];
  claims: GroupClaim[];
}

export interface Decision {
  group_id: string;
  action: 'keep' | 'remove' | 'select_evidence';
  decided_by: string;
  decided_at: string;
  chosen_evidence: string[];
}

export interface MergeSession {
  id: string;
  template_id: string;
  participants: string[];
  source_drafts: string[];
  status: 'open' | 'finalized';
  version: number;
  groups: ClaimGroup[];
  decisions: Record<string, Decision>;
  decision_log: Decision[];
}

export interface MasterEntry {
  feature_key: string;
  value: string;
  evidence: Evidence[];
  authors: string[];
}

export interface Master {
  template_id: string;
  entries: MasterEntry[];
  provenance: { session_id: string; decisions: Decision[] };
}

export interface CellValue {
  value: string;
  evidence_count: number;
}

export interface Matrix {
  products: { id: string; name: string }[];
  feature_keys: string[];
  /** cells[feature_key][product_id]: values, or null for unknown. */
  cells: Record<string, Record<string, CellValue[] | null>>;
}

export interface Diff {
  product_a: string;
  product_b: string;
  only_in_a: string[];
  only_in_b: string[];
  differing: { feature_key: string; values_a: string[]; values_b: string[] }[];
}

export interface Prompt {
  kind: 'why_present' | 'cross_product_contrast' | 'absence';
  feature_key: string;
  product_ids: string[];
  text: string;
}

export interface Ranking {
  poll_id: string;
  student: string;
  criterion: string;
  ordered_products: string[];
  submitted_at: string;
}

export interface Consensus {
  poll_id: string;
  criterion: string;
  scores: Record<string, number>;
  ordering: string[];
  voter_count: number;
}

export interface EvidenceAssetInput {
  bytes_base64?: string;
  media_type?: string;
  content_hash?: string;
}
