import { initApp } from "./app.js";

const root = document.getElementById("app");
if (root) {
  // served from the engine at /ui, so the API lives at the same origin
  initApp(root as HTMLElement, { baseUrl: "" });
}
