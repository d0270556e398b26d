/**
 * Browser entry point. Wires the login form, role-gated navigation, hash
 * routing, and the three stage controllers onto the page. Sections for
 * roles the token does not hold are never rendered; the server remains the
 * only authority on what each operator may do.
 */

import { ApiError } from './api.js';
import { ComparisonBoard, renderConsensus, renderDiff, renderMatrix, renderPrompts, renderRankingList } from './board.js';
import { MergeConsole, renderConsole, renderMaster } from './merge.js';
import { errorLine, escapeHtml } from './render.js';
import { DragToReorder } from './reorder.js';
import { login, visibleActions, type SessionView } from './session.js';
import type { RoleName } from './types.js';
import { InvestigationWizard, locatorFieldFor, renderVideoEvidence, renderWizard } from './wizard.js';

const SECTION_BY_ROLE: Record<RoleName, { hash: string; label: string }> = {
  crowd_worker: { hash: '#/investigate', label: 'Investigate' },
  admin: { hash: '#/merge', label: 'Merge' },
  student: { hash: '#/compare', label: 'Compare' },
};

function roleForHash(hash: string): RoleName | null {
  for (const [role, section] of Object.entries(SECTION_BY_ROLE)) {
    if (section.hash === hash) {
      return role as RoleName;
    }
  }
  return null;
}

export class App {
  session: SessionView | null = null;
  wizard: InvestigationWizard | null = null;
  console: MergeConsole | null = null;
  board: ComparisonBoard | null = null;
  private reorder: DragToReorder | null = null;

  constructor(private readonly root: HTMLElement) {}

  start(): void {
    window.addEventListener('hashchange', () => {
      void this.route();
    });
    this.renderLogin();
  }

  // ------------------------------------------------------------------ login

  private renderLogin(message = ''): void {
    this.root.innerHTML =
      `<form id="login-form" class="login">` +
      `<label>Access token <input id="login-token" type="password" autocomplete="off"></label>` +
      `<button type="submit">Sign in</button>` +
      message +
      `</form>`;
    const form = this.root.querySelector<HTMLFormElement>('#login-form');
    form?.addEventListener('submit', (event) => {
      event.preventDefault();
      const input = this.root.querySelector<HTMLInputElement>('#login-token');
      void this.signIn(input?.value.trim() ?? '');
    });
  }

  private async signIn(token: string): Promise<void> {
    try {
      this.session = await login('', token);
    } catch (error) {
      const line =
        error instanceof ApiError
          ? errorLine(error.code, error.message)
          : errorLine('network', 'could not reach the server');
      this.renderLogin(line);
      return;
    }
    this.wizard = new InvestigationWizard(this.session.client);
    this.console = new MergeConsole(this.session.client);
    this.board = new ComparisonBoard(this.session.client);
    const first = SECTION_BY_ROLE[this.session.roleContext];
    window.location.hash = first.hash;
    await this.route();
  }

  // ---------------------------------------------------------------- routing

  private nav(): string {
    if (!this.session) {
      return '';
    }
    // Only detected roles get a tab; there is no disabled placeholder.
    const tabs = this.session.roles
      .map((role) => {
        const section = SECTION_BY_ROLE[role];
        const active = window.location.hash === section.hash ? 'active' : '';
        return `<a class="nav-tab ${active}" href="${section.hash}">${section.label}</a>`;
      })
      .join('');
    return `<nav class="role-nav">${tabs}</nav>`;
  }

  async route(): Promise<void> {
    if (!this.session) {
      this.renderLogin();
      return;
    }
    const role = roleForHash(window.location.hash) ?? this.session.roleContext;
    if (!this.session.roles.includes(role)) {
      // Deep link into a section this token cannot use: fall back.
      window.location.hash = SECTION_BY_ROLE[this.session.roleContext].hash;
      return;
    }
    this.session.roleContext = role;
    if (role === 'crowd_worker') {
      await this.renderInvestigate();
    } else if (role === 'admin') {
      await this.renderMerge();
    } else {
      await this.renderCompare();
    }
  }

  private mount(body: string): HTMLElement {
    this.root.innerHTML = this.nav() + `<main id="stage">${body}</main>`;
    return this.root.querySelector<HTMLElement>('#stage') as HTMLElement;
  }

  // ------------------------------------------------------------ stage one

  private async renderInvestigate(): Promise<void> {
    if (!this.session || !this.wizard) {
      return;
    }
    const actions = visibleActions(this.session.roles, 'crowd_worker');
    const templates = await this.session.client.listTemplates();
    const drafts = await this.session.client.listDrafts();
    const templateOptions = templates
      .map((t) => `<option value="${escapeHtml(t.id)}">${escapeHtml(t.name)}</option>`)
      .join('');
    const draftLinks = drafts
      .map(
        (d) =>
          `<li><button class="resume-draft" data-draft="${escapeHtml(d.id)}">` +
          `${escapeHtml(d.id)} (${escapeHtml(d.status)})</button></li>`,
      )
      .join('');
    const opener = actions.includes('open-draft')
      ? `<form id="open-draft"><select id="draft-template">${templateOptions}</select>` +
        `<button type="submit">Start investigating</button></form>`
      : '';
    const stage = this.mount(
      opener + `<ul class="draft-list">${draftLinks}</ul><div id="wizard-slot"></div><div id="video-slot"></div>`,
    );
    stage.querySelector('#open-draft')?.addEventListener('submit', (event) => {
      event.preventDefault();
      const select = stage.querySelector<HTMLSelectElement>('#draft-template');
      if (select?.value) {
        void this.wizard!.begin(select.value).then(() => this.paintWizard());
      }
    });
    stage.addEventListener('click', (event) => {
      const target = event.target;
      if (!(target instanceof HTMLElement)) {
        return;
      }
      const resume = target.closest<HTMLElement>('.resume-draft');
      if (resume?.dataset['draft']) {
        void this.wizard!.resume(resume.dataset['draft']).then(() => this.paintWizard());
      }
      const chip = target.closest<HTMLElement>('.evidence-chip');
      if (chip?.dataset['video']) {
        void this.playVideo(chip.dataset['video'], Number(chip.dataset['seconds'] ?? '0'));
      }
      if (target.id === 'wizard-submit') {
        void this.wizard!.submit().then(() => this.paintWizard());
      }
    });
    stage.addEventListener('submit', (event) => {
      const form = event.target;
      if (!(form instanceof HTMLFormElement)) {
        return;
      }
      if (form.id === 'claim-form') {
        event.preventDefault();
        const data = new FormData(form);
        void this.wizard!
          .addClaim(String(data.get('feature_key') ?? ''), String(data.get('value') ?? ''))
          .then(() => this.paintWizard());
      }
      if (form.id === 'evidence-form') {
        event.preventDefault();
        void this.handleEvidenceForm(form);
      }
    });
  }

  /** The feature -> value -> evidence walk, re-rendered from the server. */
  private paintWizard(): void {
    const slot = this.root.querySelector<HTMLElement>('#wizard-slot');
    if (!slot || !this.wizard?.draft) {
      return;
    }
    const view = this.wizard.view();
    const featureOptions = this.wizard.features
      .map((f) => `<option value="${escapeHtml(f.key)}">${escapeHtml(f.display_name)}</option>`)
      .join('');
    const claimOptions = view.claims
      .map((c) => `<option value="${escapeHtml(c.id)}">${escapeHtml(c.featureKey)} = ${escapeHtml(c.value)}</option>`)
      .join('');
    const retry = this.wizard.retryPrompt
      ? `<button id="wizard-reload">Someone else changed this draft; reload and retry</button>`
      : '';
    slot.innerHTML =
      renderWizard(view, this.wizard.lastError ?? undefined) +
      retry +
      `<form id="claim-form"><h3>New claim</h3>` +
      `<select name="feature_key">${featureOptions}</select>` +
      `<input name="value" placeholder="value">` +
      `<button type="submit">Record claim</button></form>` +
      `<form id="evidence-form"><h3>Attach evidence</h3>` +
      `<select name="claim_id">${claimOptions}</select>` +
      `<select name="source_kind"><option>packaging</option><option>leaflet</option>` +
      `<option>terms_and_conditions</option><option>promo_video</option><option>web_page</option>` +
      `<option>advertisement</option><option>app_ui</option><option>other</option></select>` +
      `<input name="locator_value" placeholder="page / seconds / link / quote">` +
      `<button type="submit">Attach</button></form>`;
    slot.querySelector('#wizard-reload')?.addEventListener('click', () => {
      void this.wizard!.reload().then(() => this.paintWizard());
    });
  }

  private async handleEvidenceForm(form: HTMLFormElement): Promise<void> {
    const data = new FormData(form);
    const sourceKind = String(data.get('source_kind') ?? 'other');
    const raw = String(data.get('locator_value') ?? '');
    const field = locatorFieldFor(sourceKind);
    const locator =
      field === 'document_page'
        ? { type: field, page: Number(raw) || 1 }
        : field === 'video_timestamp'
          ? { type: field, seconds: Number(raw) || 0 }
          : field === 'url'
            ? { type: field, link: raw }
            : { type: field, quote: raw };
    await this.wizard!.attachEvidence(String(data.get('claim_id') ?? ''), sourceKind, locator);
    this.paintWizard();
  }

  private async playVideo(contentHash: string, seconds: number): Promise<void> {
    if (!this.session) {
      return;
    }
    const slot = this.root.querySelector<HTMLElement>('#video-slot');
    if (!slot) {
      return;
    }
    // <video src> cannot carry the bearer header; fetch, then play a blob URL.
    const blob = await this.session.client.fetchAsset(contentHash);
    const url = URL.createObjectURL(blob);
    slot.innerHTML = renderVideoEvidence(url, seconds);
    const video = slot.querySelector('video');
    video?.addEventListener('loadedmetadata', () => {
      video.currentTime = seconds;
    });
  }

  // ------------------------------------------------------------ stage two

  private async renderMerge(): Promise<void> {
    if (!this.session || !this.console) {
      return;
    }
    const templates = await this.session.client.listTemplates();
    const open = templates.filter((t) => t.status === 'open');
    const options = open
      .map((t) => `<option value="${escapeHtml(t.id)}">${escapeHtml(t.name)}</option>`)
      .join('');
    const stage = this.mount(
      `<form id="open-session"><select id="merge-template">${options}</select>` +
        `<input id="merge-participants" placeholder="participant ids, comma separated">` +
        `<button type="submit">Open merge session</button></form>` +
        `<div id="console-slot"></div><div id="master-slot"></div>`,
    );
    stage.querySelector('#open-session')?.addEventListener('submit', (event) => {
      event.preventDefault();
      const select = stage.querySelector<HTMLSelectElement>('#merge-template');
      const participants = stage
        .querySelector<HTMLInputElement>('#merge-participants')!
        .value.split(',')
        .map((part) => part.trim())
        .filter(Boolean);
      if (select?.value) {
        void this.console!.open(select.value, participants).then(() => this.paintConsole());
      }
    });
    stage.addEventListener('click', (event) => {
      const target = event.target;
      if (!(target instanceof HTMLElement)) {
        return;
      }
      void this.handleConsoleClick(target);
    });
  }

  private paintConsole(): void {
    const slot = this.root.querySelector<HTMLElement>('#console-slot');
    if (!slot || !this.console?.session) {
      return;
    }
    slot.innerHTML = renderConsole(this.console.view(), this.console.lastError ?? undefined);
    const masterSlot = this.root.querySelector<HTMLElement>('#master-slot');
    if (masterSlot) {
      masterSlot.innerHTML = this.console.master ? renderMaster(this.console.master) : '';
    }
  }

  private async handleConsoleClick(target: HTMLElement): Promise<void> {
    if (!this.console?.session) {
      return;
    }
    const pick = target.closest<HTMLElement>('.pick-evidence');
    if (pick?.dataset['group']) {
      const section = pick.closest('.claim-group');
      const chosen = Array.from(
        section?.querySelectorAll<HTMLInputElement>('input[data-evidence]:checked') ?? [],
      ).map((box) => box.dataset['evidence'] ?? '');
      await this.console.decide(pick.dataset['group'], 'select_evidence', chosen);
      this.paintConsole();
      return;
    }
    if (target instanceof HTMLInputElement && target.classList.contains('group-remove')) {
      const groupId = target.dataset['group'];
      if (groupId) {
        await this.console.decide(groupId, target.checked ? 'remove' : 'keep');
        this.paintConsole();
      }
      return;
    }
    if (target.id === 'console-finalize') {
      await this.console.finalize();
      this.paintConsole();
    }
  }

  // ---------------------------------------------------------- stage three

  private async renderCompare(): Promise<void> {
    if (!this.session || !this.board) {
      return;
    }
    const options = await this.board.loadProducts();
    const checkboxes = options
      .map((option) => {
        const note = option.selectable ? '' : ` <em class="why-not">${escapeHtml(option.reason)}</em>`;
        const disabled = option.selectable ? '' : 'disabled';
        return (
          `<label class="product-option"><input type="checkbox" class="pick-product" ` +
          `value="${escapeHtml(option.templateId)}" ${disabled}> ${escapeHtml(option.name)}${note}</label>`
        );
      })
      .join('');
    const stage = this.mount(
      `<fieldset id="product-picker">${checkboxes}` +
        `<button id="run-compare" disabled>Compare</button></fieldset>` +
        `<div id="matrix-slot"></div><div id="prompt-slot"></div><div id="diff-slot"></div>` +
        `<div id="ranking-slot"></div><div id="consensus-slot"></div>`,
    );
    stage.addEventListener('change', (event) => {
      const box = event.target;
      if (box instanceof HTMLInputElement && box.classList.contains('pick-product')) {
        this.board!.toggle(box.value);
        const button = stage.querySelector<HTMLButtonElement>('#run-compare');
        if (button) {
          button.disabled = this.board!.compareDisabled();
        }
      }
    });
    stage.querySelector('#run-compare')?.addEventListener('click', () => {
      void this.runComparison();
    });
  }

  private async runComparison(): Promise<void> {
    if (!this.board) {
      return;
    }
    const view = await this.board.compare();
    const matrixSlot = this.root.querySelector<HTMLElement>('#matrix-slot');
    const promptSlot = this.root.querySelector<HTMLElement>('#prompt-slot');
    const rankingSlot = this.root.querySelector<HTMLElement>('#ranking-slot');
    if (!matrixSlot || !promptSlot || !rankingSlot) {
      return;
    }
    if (!view) {
      matrixSlot.innerHTML = this.board.renderError();
      return;
    }
    matrixSlot.innerHTML = renderMatrix(view);
    promptSlot.innerHTML = renderPrompts(this.board.prompts);
    rankingSlot.innerHTML =
      `<h3>Your privacy ranking</h3>` +
      `<input id="poll-id" placeholder="poll id" value="privacy">` +
      `<button id="load-ballot">Start ranking</button><div id="ballot-slot"></div>`;
    rankingSlot.querySelector('#load-ballot')?.addEventListener('click', () => {
      const poll = rankingSlot.querySelector<HTMLInputElement>('#poll-id')?.value || 'privacy';
      void this.board!.loadBallot(poll).then(() => this.paintBallot(poll));
    });
    if (this.board.selection.length === 2) {
      const [a, b] = this.board.selection;
      const diff = await this.board.compareTwo(a as string, b as string);
      const diffSlot = this.root.querySelector<HTMLElement>('#diff-slot');
      if (diffSlot && diff) {
        diffSlot.innerHTML = renderDiff(diff);
      }
    }
  }

  private paintBallot(pollId: string): void {
    const slot = this.root.querySelector<HTMLElement>('#ballot-slot');
    if (!slot || !this.board) {
      return;
    }
    slot.innerHTML =
      renderRankingList(this.board.ballot) + `<button id="submit-ranking">Submit ranking</button>`;
    this.reorder?.detach();
    const list = slot.querySelector<HTMLElement>('.ranking-list');
    if (list) {
      this.reorder = new DragToReorder(list, {
        onReorder: (orderedIds) => {
          const byId = new Map(this.board!.ballot.map((item) => [item.id, item]));
          this.board!.ballot = orderedIds
            .map((id) => byId.get(id))
            .filter((item): item is { id: string; name: string } => item !== undefined);
          this.paintBallot(pollId);
        },
      });
    }
    slot.querySelector('#submit-ranking')?.addEventListener('click', () => {
      void this.submitRanking(pollId);
    });
  }

  private async submitRanking(pollId: string): Promise<void> {
    if (!this.board) {
      return;
    }
    const consensus = await this.board.submitRanking(pollId);
    const slot = this.root.querySelector<HTMLElement>('#consensus-slot');
    if (!slot) {
      return;
    }
    if (!consensus) {
      slot.innerHTML = this.board.renderError();
      return;
    }
    const names = new Map(this.board.ballot.map((item) => [item.id, item.name]));
    slot.innerHTML = renderConsensus(consensus, names);
  }
}

const rootElement = document.getElementById('app');
if (rootElement) {
  new App(rootElement).start();
}
