/**
 * Stage 3 comparison board: pick finalized products, read the server's
 * feature matrix, inspect pairwise differences and discussion prompts, then
 * rank the products by dragging and watch the class consensus move. Every
 * displayed value is taken verbatim from an API response; the board does no
 * aggregation of its own.
 */

import { ApiError, DevicelabClient } from './api.js';
import { escapeHtml, errorLine } from './render.js';
import type {
  Consensus,
  Diff,
  Matrix,
  Prompt,
  Ranking,
  Template,
} from './types.js';

export interface ProductOption {
  templateId: string;
  name: string;
  selectable: boolean;
  /** Shown when a product cannot be compared yet. */
  reason: string;
}

/** Only merged products can enter a comparison; the rest say why not. */
export function productOptions(templates: Template[]): ProductOption[] {
  return templates.map((template) => ({
    templateId: template.id,
    name: template.name,
    selectable: template.status === 'merged',
    reason: template.status === 'merged' ? '' : `not merged yet (${template.status})`,
  }));
}

/** The server refuses comparisons of fewer than two products; mirror that. */
export function compareDisabled(selection: string[]): boolean {
  return selection.length < 2;
}

export type MatrixCell =
  | { kind: 'unknown' }
  | { kind: 'values'; values: { value: string; evidenceCount: number }[] };

export interface MatrixView {
  products: { id: string; name: string }[];
  rows: { featureKey: string; cells: MatrixCell[] }[];
}

/** Total projection: one cell per (feature, product), unknown kept distinct. */
export function matrixView(matrix: Matrix): MatrixView {
  return {
    products: matrix.products,
    rows: matrix.feature_keys.map((featureKey) => ({
      featureKey,
      cells: matrix.products.map((product) => {
        const cell = matrix.cells[featureKey]?.[product.id];
        if (cell === null || cell === undefined) {
          return { kind: 'unknown' } as MatrixCell;
        }
        return {
          kind: 'values',
          values: cell.map((entry) => ({
            value: entry.value,
            evidenceCount: entry.evidence_count,
          })),
        } as MatrixCell;
      }),
    })),
  };
}

function renderCell(cell: MatrixCell): string {
  if (cell.kind === 'unknown') {
    // Unknown is not "no": it gets its own look, never an empty cell.
    return `<td class="cell-unknown">unknown</td>`;
  }
  const values = cell.values
    .map(
      (entry) =>
        `<span class="cell-value">${escapeHtml(entry.value)}` +
        `<sup title="evidence items">${entry.evidenceCount}</sup></span>`,
    )
    .join(', ');
  return `<td class="cell-known">${values}</td>`;
}

export function renderMatrix(view: MatrixView): string {
  const head = view.products
    .map((product) => `<th>${escapeHtml(product.name)}</th>`)
    .join('');
  const body = view.rows
    .map(
      (row) =>
        `<tr><th class="feature-name">${escapeHtml(row.featureKey)}</th>` +
        row.cells.map(renderCell).join('') +
        `</tr>`,
    )
    .join('');
  return (
    `<div class="matrix-scroll"><table class="feature-matrix">` +
    `<thead><tr><th>feature</th>${head}</tr></thead>` +
    `<tbody>${body}</tbody></table></div>`
  );
}

export function renderDiff(diff: Diff): string {
  const side = (label: string, keys: string[]) =>
    `<div class="diff-side"><h4>${escapeHtml(label)}</h4><ul>` +
    keys.map((key) => `<li>${escapeHtml(key)}</li>`).join('') +
    `</ul></div>`;
  const differing = diff.differing
    .map(
      (row) =>
        `<tr><td>${escapeHtml(row.feature_key)}</td>` +
        `<td>${escapeHtml(row.values_a.join(', '))}</td>` +
        `<td>${escapeHtml(row.values_b.join(', '))}</td></tr>`,
    )
    .join('');
  return (
    `<section class="product-diff">` +
    side(`only ${diff.product_a}`, diff.only_in_a) +
    side(`only ${diff.product_b}`, diff.only_in_b) +
    `<table class="diff-values"><thead><tr><th>feature</th>` +
    `<th>${escapeHtml(diff.product_a)}</th><th>${escapeHtml(diff.product_b)}</th></tr></thead>` +
    `<tbody>${differing}</tbody></table></section>`
  );
}

export function renderPrompts(prompts: Prompt[]): string {
  const items = prompts
    .map(
      (prompt) =>
        `<li class="prompt ${escapeHtml(prompt.kind)}">${escapeHtml(prompt.text)}</li>`,
    )
    .join('');
  return `<aside class="discussion-prompts"><h3>Talk about it</h3><ul>${items}</ul></aside>`;
}

export function renderRankingList(products: { id: string; name: string }[]): string {
  const items = products
    .map(
      (product, index) =>
        `<li class="rank-item" draggable="true" data-product="${escapeHtml(product.id)}">` +
        `<span class="rank-position">${index + 1}</span> ${escapeHtml(product.name)}</li>`,
    )
    .join('');
  return `<ol class="ranking-list">${items}</ol>`;
}

export function renderConsensus(consensus: Consensus, names: Map<string, string>): string {
  const rows = consensus.ordering
    .map((productId, index) => {
      const name = names.get(productId) ?? productId;
      const score = consensus.scores[productId] ?? 0;
      return (
        `<tr><td>${index + 1}</td><td>${escapeHtml(name)}</td>` +
        `<td>${score}</td></tr>`
      );
    })
    .join('');
  return (
    `<section class="consensus" data-voters="${consensus.voter_count}">` +
    `<h3>Class ranking (${consensus.voter_count} voters)</h3>` +
    `<table><thead><tr><th>#</th><th>product</th><th>points</th></tr></thead>` +
    `<tbody>${rows}</tbody></table></section>`
  );
}

export class ComparisonBoard {
  templates: Template[] = [];
  selection: string[] = [];
  matrix: Matrix | null = null;
  diff: Diff | null = null;
  prompts: Prompt[] = [];
  ballot: { id: string; name: string }[] = [];
  consensus: Consensus | null = null;
  lastRanking: Ranking | null = null;
  lastError: ApiError | null = null;

  constructor(private readonly client: DevicelabClient) {}

  async loadProducts(): Promise<ProductOption[]> {
    this.templates = await this.client.listTemplates();
    return productOptions(this.templates);
  }

  toggle(templateId: string): void {
    const option = productOptions(this.templates).find(
      (candidate) => candidate.templateId === templateId,
    );
    if (!option || !option.selectable) {
      return;
    }
    if (this.selection.includes(templateId)) {
      this.selection = this.selection.filter((id) => id !== templateId);
    } else {
      this.selection = [...this.selection, templateId];
    }
  }

  compareDisabled(): boolean {
    return compareDisabled(this.selection);
  }

  private async guarded<T>(call: () => Promise<T>): Promise<T | null> {
    this.lastError = null;
    try {
      return await call();
    } catch (error) {
      if (error instanceof ApiError) {
        this.lastError = error;
        return null;
      }
      throw error;
    }
  }

  async compare(): Promise<MatrixView | null> {
    const matrix = await this.guarded(() => this.client.compare(this.selection));
    if (!matrix) {
      return null;
    }
    this.matrix = matrix;
    this.prompts = (await this.guarded(() => this.client.prompts(this.selection))) ?? [];
    return matrixView(matrix);
  }

  /**
   * The ballot covers the poll's product set: an existing poll keeps the set
   * it was frozen with; a first ballot will freeze it to every merged
   * product, so that is what gets offered.
   */
  async loadBallot(pollId: string): Promise<{ id: string; name: string }[]> {
    const names = new Map(this.templates.map((template) => [template.id, template.name]));
    try {
      const consensus = await this.client.consensus(pollId);
      this.ballot = consensus.ordering.map((id) => ({ id, name: names.get(id) ?? id }));
    } catch (error) {
      if (!(error instanceof ApiError) || error.code !== 'no-rankings') {
        throw error;
      }
      this.ballot = this.templates
        .filter((template) => template.status === 'merged')
        .map((template) => ({ id: template.id, name: template.name }))
        .sort((a, b) => (a.name < b.name ? -1 : a.name > b.name ? 1 : 0));
    }
    return this.ballot;
  }

  async compareTwo(productA: string, productB: string): Promise<Diff | null> {
    this.diff = await this.guarded(() => this.client.diff(productA, productB));
    return this.diff;
  }

  /** Move one ballot entry; positions are what gets submitted. */
  reorder(from: number, to: number): void {
    if (from < 0 || from >= this.ballot.length || to < 0 || to >= this.ballot.length) {
      return;
    }
    const next = [...this.ballot];
    const moved = next.splice(from, 1)[0];
    if (moved === undefined) {
      return;
    }
    next.splice(to, 0, moved);
    this.ballot = next;
  }

  async submitRanking(pollId: string, criterion?: string): Promise<Consensus | null> {
    const ranking = await this.guarded(() =>
      this.client.submitRanking(
        pollId,
        this.ballot.map((product) => product.id),
        criterion,
      ),
    );
    if (!ranking) {
      return null;
    }
    this.lastRanking = ranking;
    this.consensus = await this.guarded(() => this.client.consensus(pollId));
    return this.consensus;
  }

  renderError(): string {
    return this.lastError ? errorLine(this.lastError.code, this.lastError.message) : '';
  }
}
