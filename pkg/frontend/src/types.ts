// Mirrors of the service JSON bodies. The UI never mutates server state
// except through the endpoints; these views are re-fetched after writes.

export interface HitView {
  judgment_id: string;
  number: number;
  rank: number;
  similarity: number;
}

export interface ParagraphEntry {
  number: number;
  rank: number;
  similarity: number;
}

export interface JudgmentGroup {
  judgment_id: string;
  case_name: string;
  date: string;
  paragraphs: ParagraphEntry[];
}

export interface OutlineNodeView {
  node_id: string;
  title: string;
  marker: string | null;
  source_cluster: string | null;
  children: OutlineNodeView[];
}

export interface SectionDraftView {
  node_id: string;
  text: string;
  citations: [string, number][];
  unresolved: [string, number][];
  generation_error: string | null;
}

export interface StageStatus {
  state: "idle" | "running" | "done" | "failed";
  error: string | null;
  nodes?: Record<string, string>;
}

export interface SessionView {
  session_id: string;
  query: string;
  params: Record<string, unknown>;
  pipeline_mode: Record<string, unknown>;
  created_at: string;
  hits: HitView[];
  judgments: JudgmentGroup[];
  outline: { roots: OutlineNodeView[] } | null;
  toc_text: string | null;
  sections: Record<string, SectionDraftView>;
  status: { outline: StageStatus; generation: StageStatus };
  link_template: string;
}

export interface FuzzyMatch {
  judgment_id: string;
  number: number;
  case_name: string;
  score: number;
  snippet: string;
}

export interface RetrievalParamsInput {
  k: number;
  sim_threshold: number;
  lambda?: number;
  mode?: "mmr" | "relevance";
  fetch_k?: number;
}
