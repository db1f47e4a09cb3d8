/**
 * Pure projection of API state into the exercise screen model.
 *
 * No geometry, no network, no mutation: the same payload always yields
 * the same ScreenModel, and button enablement is derived entirely from
 * the session phase and image cursor.
 */

import type {
  ApiEnvelope,
  Phase,
  RadiographDoc,
  ReportPayload,
  SessionStatePayload,
} from "./types.js";

export const BUTTONS = [
  "PLACE",
  "ORIENTATE",
  "PUSH_IN",
  "RETURN",
  "INLET",
  "OUTLET",
  "AP",
  "PREVIOUS",
  "FOLLOWING",
  "CONFIRM",
  "LESSON",
  "HELP",
  "INSTRUCTIONS_FOR_USE",
] as const;

export type ButtonId = (typeof BUTTONS)[number];

export interface WireOverlay {
  entryUV: [number, number];
  directionUV: [number, number];
  depth: number;
  wireLength: number;
}

export interface ScreenModel {
  phase: Phase | null;
  wire: WireOverlay | null;
  imagePanel: { current: RadiographDoc | null; previous: RadiographDoc | null };
  counters: { xrays: number; trials: number };
  buttons: Record<ButtonId, boolean>;
  feedback: ReportPayload | null;
  error: string | null;
}

function disabledButtons(): Record<ButtonId, boolean> {
  const map = {} as Record<ButtonId, boolean>;
  for (const b of BUTTONS) map[b] = false;
  // local-only modes stay available even on a broken screen
  map.HELP = true;
  map.INSTRUCTIONS_FOR_USE = true;
  return map;
}

export function errorModel(message: string): ScreenModel {
  return {
    phase: null,
    wire: null,
    imagePanel: { current: null, previous: null },
    counters: { xrays: 0, trials: 0 },
    buttons: disabledButtons(),
    feedback: null,
    error: message,
  };
}

function isState(value: unknown): value is SessionStatePayload {
  const s = value as SessionStatePayload | null;
  return (
    !!s &&
    typeof s === "object" &&
    (s.phase === "positioning" || s.phase === "inserted" || s.phase === "confirmed") &&
    !!s.counters &&
    typeof s.counters.xrays === "number" &&
    typeof s.counters.trials === "number" &&
    !!s.images &&
    typeof s.image_count === "number" &&
    typeof s.image_cursor === "number" &&
    !!s.wire
  );
}

function extractFeedback(envelope: ApiEnvelope): ReportPayload | null {
  if (envelope.report) return envelope.report;
  if (typeof envelope.assessment === "string" && envelope.metrics) {
    return {
      assessment: envelope.assessment,
      metrics: envelope.metrics,
      lesson_id: envelope.lesson_id ?? null,
    };
  }
  return null;
}

/** Build the screen model from a command/confirm response envelope
 * (or a bare `{state}` object). Malformed input yields an error banner. */
export function viewModel(payload: unknown): ScreenModel {
  const envelope = payload as ApiEnvelope | null;
  if (!envelope || typeof envelope !== "object" || !isState(envelope.state)) {
    return errorModel("malformed session state");
  }
  const state = envelope.state;
  const confirmed = state.phase === "confirmed";
  const positioning = state.phase === "positioning";
  const feedback = confirmed ? extractFeedback(envelope) : null;

  const buttons: Record<ButtonId, boolean> = {
    PLACE: positioning,
    ORIENTATE: positioning,
    PUSH_IN: !confirmed,
    RETURN: state.phase === "inserted",
    INLET: !confirmed,
    OUTLET: !confirmed,
    AP: !confirmed,
    PREVIOUS: state.image_cursor > 0,
    FOLLOWING: state.image_cursor < state.image_count - 1,
    CONFIRM: !confirmed,
    LESSON: feedback !== null && feedback.lesson_id !== null,
    HELP: true,
    INSTRUCTIONS_FOR_USE: true,
  };

  return {
    phase: state.phase,
    wire: {
      entryUV: [state.wire.entry_skin_uv[0], state.wire.entry_skin_uv[1]],
      directionUV: [state.wire.direction_skin_uv[0], state.wire.direction_skin_uv[1]],
      depth: state.wire.depth,
      wireLength: state.wire.wire_length,
    },
    imagePanel: {
      current: state.images.current,
      previous: state.images.previous,
    },
    counters: { xrays: state.counters.xrays, trials: state.counters.trials },
    buttons,
    feedback,
    error: null,
  };
}
