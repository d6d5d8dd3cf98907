// Client-side rendering of citation tokens inside generated section text.

const CITATION = /\(([^\s#()]+)#(\d+)\)/g;

function escapeHtml(s: string): string {
  return s
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

export function linkFor(template: string, judgmentId: string, number: number): string {
  return template.replaceAll("{id}", judgmentId).replaceAll("{para}", String(number));
}

/**
 * Section text -> HTML with resolved citations as external links and
 * unresolved ones highlighted (kept visible, never dropped).
 */
export function renderSectionHtml(
  text: string,
  unresolved: [string, number][],
  linkTemplate: string,
): string {
  const bad = new Set(unresolved.map(([j, n]) => `${j}#${n}`));
  const escaped = escapeHtml(text);
  return escaped.replace(CITATION, (whole, judgmentId: string, number: string) => {
    if (bad.has(`${judgmentId}#${number}`)) {
      return `<span class="citation-unresolved" title="unresolved citation">⚠${whole}</span>`;
    }
    const href = linkFor(linkTemplate, judgmentId, Number(number));
    return `<a class="citation" target="_blank" rel="noopener" href="${escapeHtml(href)}">(${judgmentId} § ${number})</a>`;
  });
}

export { escapeHtml };
