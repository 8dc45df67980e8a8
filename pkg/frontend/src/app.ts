/**
 * Single-page app shell: hash routing between the four screens. All
 * authoritative state lives on the server; the only client-side state is
 * the session (worker id, optional token, open HIT id), kept in
 * localStorage so a refresh resumes where the worker left off.
 */

import { ApiClient } from "./api.js";
import { AdminScreen } from "./admin.js";
import { GenerationScreen } from "./generation.js";
import { TrainingScreen } from "./training.js";
import { ValidationScreen } from "./validation.js";

interface Session {
  workerId: string;
  token?: string;
  openHitId?: string;
}

const SESSION_KEY = "qaloop-session";

function loadSession(storage: Storage): Session | null {
  const raw = storage.getItem(SESSION_KEY);
  return raw ? (JSON.parse(raw) as Session) : null;
}

function saveSession(storage: Storage, session: Session): void {
  storage.setItem(SESSION_KEY, JSON.stringify(session));
}

export function startApp(win: Window): void {
  const doc = win.document;
  const rootElement = doc.getElementById("app");
  if (!rootElement) throw new Error("missing #app root");

  const render = async () => {
    rootElement.textContent = "";
    const session = loadSession(win.localStorage);
    const route = win.location.hash.replace(/^#\/?/, "") || "home";

    if (!session && route !== "home") {
      win.location.hash = "#/home";
      return;
    }

    const client = new ApiClient({
      baseUrl: win.location.origin,
      token: session?.token,
    });

    if (route === "home") {
      rootElement.append(buildHome(doc, win));
      return;
    }
    if (!session) return;

    if (route === "training") {
      rootElement.append(new TrainingScreen(doc, client, session.workerId).root);
    } else if (route === "generate") {
      const screen = new GenerationScreen(doc, client, session.workerId, () => {
        saveSession(win.localStorage, { ...session, openHitId: undefined });
      });
      rootElement.append(screen.root);
      if (session.openHitId) {
        await screen.resume(session.openHitId);
      } else {
        const adversaryId = (await client.health()).adversaries[0];
        const hit = await screen.open(adversaryId, "train");
        saveSession(win.localStorage, { ...session, openHitId: hit.id });
      }
    } else if (route === "validate") {
      const screen = new ValidationScreen(doc, client, session.workerId);
      rootElement.append(screen.root);
      await screen.load();
    } else if (route === "admin") {
      const screen = new AdminScreen(doc, client);
      rootElement.append(screen.root);
      await screen.refresh();
    }
  };

  const buildHome = (documentRef: Document, windowRef: Window): HTMLElement => {
    const section = documentRef.createElement("section");
    section.className = "home-screen";
    const heading = documentRef.createElement("h1");
    heading.textContent = "Adversarial question annotation";
    const workerInput = documentRef.createElement("input");
    workerInput.placeholder = "worker id";
    const tokenInput = documentRef.createElement("input");
    tokenInput.placeholder = "access token (if required)";
    const start = documentRef.createElement("button");
    start.textContent = "Start";
    start.addEventListener("click", () => {
      if (!workerInput.value.trim()) return;
      saveSession(windowRef.localStorage, {
        workerId: workerInput.value.trim(),
        token: tokenInput.value.trim() || undefined,
      });
      windowRef.location.hash = "#/generate";
    });
    const nav = documentRef.createElement("nav");
    for (const [label, hash] of [
      ["train", "#/training"],
      ["generate", "#/generate"],
      ["validate", "#/validate"],
      ["admin", "#/admin"],
    ]) {
      const link = documentRef.createElement("a");
      link.href = hash;
      link.textContent = label;
      nav.append(link);
    }
    section.append(heading, workerInput, tokenInput, start, nav);
    return section;
  };

  win.addEventListener("hashchange", () => void render());
  void render();
}

declare global {
  interface Window {
    qaloopStart?: typeof startApp;
  }
}

if (typeof window !== "undefined" && window.document?.getElementById("app")) {
  startApp(window);
}
