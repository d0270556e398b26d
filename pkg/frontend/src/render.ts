/** Shared HTML helpers for the string-template renderers. */

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

/** Human-readable line for an API error, always naming the server's code. */
export function errorLine(code: string, message: string): string {
  return `<p class="inline-error" data-code="${escapeHtml(code)}">${escapeHtml(message)}</p>`;
}
