const REPLACEMENTS: Record<string, string> = {
  "&": "&amp;",
  "<": "&lt;",
  ">": "&gt;",
  '"': "&quot;",
  "'": "&#39;",
};

/** Escape a value for interpolation into HTML text or attribute position. */
export function escapeHtml(value: unknown): string {
  return String(value).replace(/[&<>"']/g, (ch) => REPLACEMENTS[ch]);
}

/** Render label badges; the label name doubles as the style hook. */
export function badges(labels: readonly string[]): string {
  return labels
    .map((label) => `<span class="badge ${escapeHtml(label)}">${escapeHtml(label)}</span>`)
    .join(" ");
}
