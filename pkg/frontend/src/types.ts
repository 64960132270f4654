/** Wire types mirroring the service's JSON documents. The UI never derives
 * evidence values, categories or predictions itself; it renders these
 * payloads as served. */

export type Condition = "C1" | "C2" | "C3";

export interface LabelRef {
  id: number;
  name: string;
}

export interface EvidenceItemDoc {
  feature_id: number;
  feature_name: string;
  woe: number;
  category: string;
  direction: "supports" | "refutes" | "neutral";
}

export interface ReportDoc {
  hypothesis?: LabelRef;
  items: EvidenceItemDoc[];
  total_woe: number;
  weighted_total_woe: number;
  gamma: number[];
}

export interface StudyMeta {
  kind: string;
  feature_names: string[];
  labels: LabelRef[];
  n_classes: number;
  task_count: number;
  policy: string;
}

export interface SessionInfo {
  id: string;
  condition: string[];
  task_count: number;
  created_at: string;
}

export interface TaskPayload {
  condition: Condition;
  index: number;
  task_id: string;
  feature_names: string[];
  values: number[];
  n_classes: number;
  labels?: LabelRef[];
  prediction?: LabelRef;
  report?: ReportDoc;
}

export interface DecisionBody {
  task_index: number;
  label: number;
  confidence?: number;
  allocation?: number[];
  client_duration?: number;
}

export interface DecisionAck {
  accepted: boolean;
  task_index: number;
  server_duration: number | null;
}

/** Client-side interaction record; kinds shared with the service log so a
 * scripted session can be reconciled one-for-one against the export. */
export interface ClientEvent {
  kind:
    | "hypothesis-selected"
    | "hypothesis-deselected"
    | "evidence-viewed"
    | "recommendation-viewed";
  task_index: number;
  payload: number;
  at: number;
}

export const GLYPHS: Record<string, string> = {
  "decisive-against": "---",
  "strong-against": "--",
  "substantial-against": "-",
  "not-significant": "N",
  "substantial-in-favour": "+",
  "strong-in-favour": "++",
  "decisive-in-favour": "+++",
};
