/** Page entry point: boots the app against the page's own origin. */

import { ApiClient, type IngestPayload } from "./api.js";
import { bootstrap } from "./main.js";

function pickIngestFile(): Promise<IngestPayload> {
  return new Promise((resolve, reject) => {
    const input = document.createElement("input");
    input.type = "file";
    input.accept = "application/json";
    input.addEventListener("change", () => {
      const file = input.files?.[0];
      if (!file) {
        reject(new Error("no file selected"));
        return;
      }
      file
        .text()
        .then((text) => resolve(JSON.parse(text) as IngestPayload))
        .catch(reject);
    });
    input.click();
  });
}

const root = document.getElementById("app");
if (root) {
  const profile = new URLSearchParams(window.location.search).get("profile") ?? undefined;
  bootstrap(root, new ApiClient(""), { profile, ingestSource: pickIngestFile });
}
