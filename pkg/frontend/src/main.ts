import { ApiClient } from "./api.js";
import { mountDashboard, mountLabeling } from "./app.js";
import type { TaskKind } from "./types.js";

function param(name: string, fallback: string): string {
  return new URLSearchParams(window.location.search).get(name) ?? fallback;
}

const api = new ApiClient(param("api", "http://127.0.0.1:8777"));
const annotator = param("annotator", "") ||
  window.prompt("annotator id?") || "anonymous";
const kind = param("kind", "relevance") as TaskKind;

const labelingRoot = document.getElementById("labeling");
if (labelingRoot) mountLabeling(labelingRoot, api, annotator, kind);

const dashboardRoot = document.getElementById("dashboard");
if (dashboardRoot) mountDashboard(dashboardRoot, api);
