/** Wire types for the review service HTTP API. */

/** One executed API call, already stripped of any run-identifying fields. */
export interface StepView {
  method: string;
  path: string;
  body: unknown;
  status: number;
  response: unknown;
}

/** One anonymized run awaiting a verdict. */
export interface ReviewItem {
  token: string;
  query: string;
  software_pass: boolean;
  steps: StepView[];
}

export interface Progress {
  total: number;
  graded: number;
  leased: number;
  remaining: number;
  done: boolean;
}

/** The five review criteria, in submission order. */
export const CRITERIA = [
  "function_selection",
  "task_representation",
  "structural_integrity",
  "functional_integrity",
  "instruction_containment",
] as const;

export type CriterionName = (typeof CRITERIA)[number];

export type Criteria = Record<CriterionName, boolean>;

export const CRITERION_LABELS: Record<CriterionName, string> = {
  function_selection: "Function selection",
  task_representation: "Task representation",
  structural_integrity: "Structural integrity",
  functional_integrity: "Functional integrity",
  instruction_containment: "Instruction containment",
};

export type NextResult =
  | { state: "item"; item: ReviewItem; progress: Progress }
  | { state: "done"; progress: Progress }
  | { state: "pending"; progress: Progress | null };

export interface StoredVerdict {
  status: "stored";
  verdict: Record<string, unknown>;
  progress: Progress;
}
