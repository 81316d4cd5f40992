// Pure view-model derivation. Everything rendered comes from API payloads;
// the only client-side state is the session id itself.

import type {
  Candidate,
  Question,
  SessionSnapshot,
  SessionStarted,
  Verdict,
} from "./types";

export type ChatMessage = { who: "patient" | "assistant"; text: string };

export type Phase =
  | "start" // no session yet: show the description form
  | "questions" // awaiting answers: show the question form
  | "finalize" // shortcut state: one sharp match, no questions to ask
  | "answered" // verdicts + answer + follow-up input
  | "closed";

export type SessionView = {
  sessionId: string;
  phase: Phase;
  candidates: Candidate[];
  questions: Question[];
  verdicts: Verdict[];
  answerText: string;
  messages: ChatMessage[];
};

const phaseOf = (state: string, questions: Question[]): Phase => {
  switch (state) {
    case "awaiting_answers":
      return "questions";
    case "stage1_complete":
      return questions.length ? "questions" : "finalize";
    case "stage2_complete":
      return "finalize";
    case "answered":
      return "answered";
    case "closed":
      return "closed";
    default:
      return "start";
  }
};

export const viewFromStart = (started: SessionStarted): SessionView => ({
  sessionId: started.session_id,
  phase: phaseOf(started.state, started.questions),
  candidates: started.candidates,
  questions: started.questions,
  verdicts: [],
  answerText: "",
  messages: [],
});

export const viewFromSnapshot = (snapshot: SessionSnapshot): SessionView => {
  const messages: ChatMessage[] = [
    { who: "patient", text: snapshot.query.text },
  ];
  for (const event of snapshot.transcript) {
    if (event.type === "answer_ready") {
      messages.push({ who: "assistant", text: String(event.data.text) });
    } else if (event.type === "user_message") {
      messages.push({ who: "patient", text: String(event.data.text) });
    } else if (event.type === "assistant_reply") {
      messages.push({ who: "assistant", text: String(event.data.text) });
    }
  }
  return {
    sessionId: snapshot.session_id,
    phase: phaseOf(snapshot.state, snapshot.questions),
    candidates: snapshot.candidates,
    questions: snapshot.questions,
    verdicts: snapshot.verdicts,
    answerText: snapshot.answer_text,
    messages,
  };
};

export const likelihoodPercent = (verdict: Verdict): number =>
  Math.round(verdict.likelihood * 1000) / 10;

export const clearsThreshold = (verdict: Verdict): boolean =>
  verdict.likelihood > 0.5;
