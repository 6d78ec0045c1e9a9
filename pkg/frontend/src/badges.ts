// Resolution-outcome badges: green for a unique match, red for a
// hallucinated (unmatched) locator, amber for an ambiguous one. The
// mapping is 1:1 with the API's outcome strings.

export const BADGE_CLASSES: Record<string, string> = {
  resolved: "badge badge-green",
  not_found: "badge badge-red",
  ambiguous: "badge badge-amber",
  timeout: "badge badge-amber",
  state_mismatch: "badge badge-red",
};

const FALLBACK = "badge badge-gray";

export function badgeClass(outcome: string | null | undefined): string {
  if (!outcome) return FALLBACK;
  return BADGE_CLASSES[outcome] ?? FALLBACK;
}

export function badgeElement(outcome: string, label: string): HTMLSpanElement {
  const span = document.createElement("span");
  span.className = badgeClass(outcome);
  span.dataset.outcome = outcome;
  span.textContent = label;
  return span;
}

export function statusBadge(status: number): HTMLSpanElement {
  const span = document.createElement("span");
  span.className = status < 400 ? "badge badge-green" : "badge badge-red";
  span.textContent = `HTTP ${status}`;
  return span;
}
