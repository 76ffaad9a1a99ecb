import { QuestionnaireApi } from "./api.js";
import { QuestionnaireController } from "./controller.js";
import { DomView } from "./view.js";

function expertIdFromUrl(): string {
  const param = new URLSearchParams(window.location.search).get("expert");
  if (param) {
    window.localStorage.setItem("expert_id", param);
    return param;
  }
  const stored = window.localStorage.getItem("expert_id");
  if (stored) {
    return stored;
  }
  const entered = window.prompt("Enter your rater id:") || `anon-${Date.now()}`;
  window.localStorage.setItem("expert_id", entered);
  return entered;
}

const root = document.getElementById("app");
if (root === null) {
  throw new Error("missing #app element");
}
const api = new QuestionnaireApi();
const controller = new QuestionnaireController(
  api,
  new DomView(
    root,
    (rating) => void controller.rate(rating),
    () => void controller.retry(),
  ),
);
void controller.start(expertIdFromUrl());
