// Typed fetch client for the /v1 session API.

import type {
  AnswerInput,
  AnswersResult,
  ApiErrorBody,
  SessionSnapshot,
  SessionStarted,
} from "./types";

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.status = status;
    this.code = code;
  }
}

const request = async <T>(
  base: string,
  path: string,
  init?: RequestInit
): Promise<T> => {
  const response = await fetch(`${base}${path}`, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  if (!response.ok) {
    let code = "http_error";
    let message = `request failed with ${response.status}`;
    try {
      const body = (await response.json()) as ApiErrorBody;
      code = body.error.code;
      message = body.error.message;
    } catch {
      // non-JSON error body: keep the generic message
    }
    throw new ApiError(response.status, code, message);
  }
  return response.json() as Promise<T>;
};

export class TriageApi {
  constructor(private readonly base: string = "") {}

  startSession(text: string, imageBase64?: string): Promise<SessionStarted> {
    return request(this.base, "/v1/sessions", {
      method: "POST",
      body: JSON.stringify(
        imageBase64 ? { text, image_base64: imageBase64 } : { text }
      ),
    });
  }

  submitAnswers(
    sessionId: string,
    answers: AnswerInput[]
  ): Promise<AnswersResult> {
    return request(this.base, `/v1/sessions/${sessionId}/answers`, {
      method: "POST",
      body: JSON.stringify({ answers }),
    });
  }

  sendMessage(sessionId: string, text: string): Promise<{ reply_text: string }> {
    return request(this.base, `/v1/sessions/${sessionId}/message`, {
      method: "POST",
      body: JSON.stringify({ text }),
    });
  }

  getSession(sessionId: string): Promise<SessionSnapshot> {
    return request(this.base, `/v1/sessions/${sessionId}`);
  }
}
