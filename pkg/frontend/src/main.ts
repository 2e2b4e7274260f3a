/**
 * Entry point: wires the session client, renderer, inputs, and forms to the
 * page. The layout is a single canvas with a control column.
 */

import { CueScheduler } from "./cues.js";
import { AdjustInput, defaultBindings } from "./input.js";
import {
  abortTrial,
  completeTrial,
  startErgonomicTrial,
  startModalityTrial,
  HelloFrame,
  StateFrame,
} from "./protocol.js";
import { SeqForm, SusForm } from "./questionnaire.js";
import { ClickPlayer, FigureRenderer } from "./render.js";
import { SessionClient } from "./session.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function setText(id: string, text: string): void {
  el(id).textContent = text;
}

function main(): void {
  const canvas = el<HTMLCanvasElement>("figure");
  const statusBadge = el<HTMLSpanElement>("status");
  const lagBadge = el<HTMLSpanElement>("lag");
  const errorToast = el<HTMLDivElement>("toast");

  const cues = new CueScheduler();
  const clicks = new ClickPlayer(false);
  let renderer: FigureRenderer | null = null;
  let input: AdjustInput | null = null;
  let lastState: StateFrame | null = null;
  let sessionT = 0;

  const url = new URLSearchParams(location.search).get("ws")
    ?? `ws://${location.hostname}:8700/session`;

  const client = new SessionClient(url, {
    onStatus: (status) => {
      statusBadge.textContent = status;
      statusBadge.className = `badge ${status}`;
    },
    onHello: (hello: HelloFrame) => {
      renderer = new FigureRenderer(canvas, hello);
      input = new AdjustInput(defaultBindings(hello.guided_joints), (frame) =>
        client.send(frame),
      );
      setText("modality", hello.modality.toUpperCase());
      cues.reset();
    },
    onState: (state: StateFrame) => {
      lastState = state;
      sessionT = state.t;
      for (const pulse of cues.ingest(state)) {
        clicks.play(pulse);
      }
      setText("trial", state.trial_active ? "trial running" : "between trials");
      if (state.eps) {
        setText(
          "eps",
          state.eps.map((value) => `${(100 * value).toFixed(1)}%`).join("  "),
        );
      } else {
        setText("eps", "-");
      }
    },
    onTrial: (frame) => {
      if (frame.action === "finished") {
        setText(
          "summary",
          frame.summary ? JSON.stringify(frame.summary, null, 1) : "(no summary)",
        );
      }
    },
    onScore: (frame) => setText("summary", `${frame.kind.toUpperCase()}: ${frame.score}`),
    onServerError: (reason) => {
      errorToast.textContent = reason;
      errorToast.classList.add("visible");
      setTimeout(() => errorToast.classList.remove("visible"), 2500);
    },
    onLag: (lagging) => {
      lagBadge.style.display = lagging ? "inline-block" : "none";
    },
  });

  // controls
  el<HTMLButtonElement>("start-torso").onclick = () => {
    const target = Number(el<HTMLInputElement>("torso-target").value);
    client.send(startModalityTrial({ torso: target }));
  };
  el<HTMLButtonElement>("start-arm").onclick = () => {
    client.send(startModalityTrial({ shoulder: -45, elbow: -90 }));
  };
  el<HTMLButtonElement>("start-ergo").onclick = () => {
    const condition = Number(el<HTMLSelectElement>("condition").value);
    client.send(startErgonomicTrial(condition));
  };
  el<HTMLButtonElement>("complete").onclick = () => client.send(completeTrial());
  el<HTMLButtonElement>("abort").onclick = () => client.send(abortTrial());
  el<HTMLInputElement>("ghost").onchange = (event) => {
    renderer?.setGhost((event.target as HTMLInputElement).checked);
  };
  el<HTMLInputElement>("audio").onchange = (event) => {
    clicks.setEnabled((event.target as HTMLInputElement).checked);
  };

  // questionnaires
  const sus = new SusForm();
  const seq = new SeqForm();
  const susBox = el<HTMLDivElement>("sus-items");
  for (let item = 0; item < 10; item++) {
    const row = document.createElement("div");
    row.innerHTML = `<label>Q${item + 1}</label>`;
    for (let value = 1; value <= 5; value++) {
      const btn = document.createElement("button");
      btn.textContent = String(value);
      btn.onclick = () => {
        sus.set(item, value);
        row.querySelectorAll("button").forEach((b) => b.classList.remove("picked"));
        btn.classList.add("picked");
      };
      row.appendChild(btn);
    }
    susBox.appendChild(row);
  }
  el<HTMLButtonElement>("sus-submit").onclick = () => {
    if (!sus.complete()) {
      errorToast.textContent = `answer items ${sus.missing().map((i) => i + 1).join(", ")}`;
      errorToast.classList.add("visible");
      setTimeout(() => errorToast.classList.remove("visible"), 2500);
      return;
    }
    client.send(sus.toFrame());
  };
  el<HTMLSelectElement>("seq-value").onchange = (event) => {
    seq.set(Number((event.target as HTMLSelectElement).value));
  };
  el<HTMLButtonElement>("seq-submit").onclick = () => {
    if (seq.complete()) {
      client.send(seq.toFrame());
    }
  };

  // keyboard
  window.addEventListener("keydown", (event) => {
    input?.keyDown(event.key, performance.now());
  });
  window.addEventListener("keyup", (event) => input?.keyUp(event.key));
  window.addEventListener("blur", () => input?.releaseAll());

  // render loop
  const loop = () => {
    input?.tick(performance.now());
    client.checkLag();
    if (renderer && lastState) {
      renderer.draw(lastState, cues, sessionT);
    }
    requestAnimationFrame(loop);
  };
  requestAnimationFrame(loop);

  client.connect();
}

main();
