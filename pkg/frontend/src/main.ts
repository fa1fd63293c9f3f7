import { ApiClient } from "./api.js";
import { StudyApp } from "./app.js";

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app mount point");
}

const app = new StudyApp({
  root,
  api: new ApiClient(""),
  onSessionChange: (sessionId) => {
    // Session id lives in the hash so a reload resumes the same session.
    window.location.hash = sessionId ? `s=${sessionId}` : "";
  },
});

const match = window.location.hash.match(/^#s=(\w+)$/);
void app.boot(match?.[1]);
