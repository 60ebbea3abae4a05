/** Pure helpers for the triage queue. */

import type { OpenAnomaly } from "./types.js";

export interface PromptGroup {
  promptId: string;
  items: OpenAnomaly[];
}

/** Group open anomalies by prompt, preserving queue order within groups and
 * ordering groups by first appearance. */
export function groupByPrompt(anomalies: OpenAnomaly[]): PromptGroup[] {
  const groups = new Map<string, OpenAnomaly[]>();
  for (const anomaly of anomalies) {
    const bucket = groups.get(anomaly.prompt_id);
    if (bucket) {
      bucket.push(anomaly);
    } else {
      groups.set(anomaly.prompt_id, [anomaly]);
    }
  }
  return [...groups.entries()].map(([promptId, items]) => ({ promptId, items }));
}

/** The verbatim text to show for one anomaly; backend failures have no raw
 * response, only a reason. */
export function anomalyDisplayText(anomaly: OpenAnomaly): string {
  if (anomaly.raw_response !== null) return anomaly.raw_response;
  return `(no response: ${anomaly.reason ?? "unknown failure"})`;
}

/** Alias insertion needs a raw response to fold; resolve-to-option always works. */
export function canAddAlias(anomaly: OpenAnomaly): boolean {
  return anomaly.raw_response !== null;
}

export function queueSummary(anomalies: OpenAnomaly[]): string {
  if (anomalies.length === 0) return "queue empty";
  const groups = groupByPrompt(anomalies);
  const parts = groups.map((g) => `${g.promptId}: ${g.items.length}`);
  return `${anomalies.length} open (${parts.join(", ")})`;
}
