import { TriageApi } from "./api";
import { TriageApp } from "./app";

declare global {
  interface Window {
    GRAPHTRIAGE_API?: string;
  }
}

const root = document.getElementById("app");
if (root) {
  const api = new TriageApi(window.GRAPHTRIAGE_API ?? "");
  void new TriageApp(root, api, window.sessionStorage).init();
}
