// Wire types mirroring the /v1 API schemas. The UI never derives state from
// anything but these payloads.

export type Via = "direct" | "neighbor";

export type Candidate = {
  id: string;
  name: string;
  score: number;
  via: Via;
};

export type Question = {
  id: string;
  text: string;
};

export type Verdict = {
  condition: string;
  likelihood: number;
  rationale: string;
};

export type SessionStarted = {
  session_id: string;
  state: string;
  candidates: Candidate[];
  questions: Question[];
};

export type AnswersResult = {
  state: string;
  verdicts: Verdict[];
  answer_text: string;
};

export type TranscriptEvent = {
  seq: number;
  type: string;
  data: Record<string, unknown>;
};

export type SessionSnapshot = {
  session_id: string;
  state: string;
  query: { text: string; has_image: boolean };
  candidates: Candidate[];
  questions: Question[];
  verdicts: Verdict[];
  answer_text: string;
  transcript: TranscriptEvent[];
};

export type AnswerInput =
  | { question_id: string; text: string }
  | { question_id: string; skip: true };

export type ApiErrorBody = {
  error: { code: string; message: string; backend?: string };
};
