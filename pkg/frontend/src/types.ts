/**
 * Wire-format types of the simulator HTTP API.
 *
 * The UI consumes the API exclusively; every shape here mirrors a JSON
 * payload produced by the service (see fixtures/states.json for recorded
 * examples).
 */

export type Vec3 = [number, number, number];
export type Point2 = [number, number];

export type Phase = "positioning" | "inserted" | "confirmed";
export type ViewName = "ap" | "inlet" | "outlet";

/** Vector radiograph: wire segment plus corridor silhouette polylines. */
export interface RadiographDoc {
  view: ViewName;
  seq: number;
  clipped: boolean;
  wire_2d: Point2[];
  silhouette: Point2[][];
}

export interface WirePayload {
  entry: Vec3;
  entry_skin_uv: Point2;
  direction: Vec3;
  direction_skin_uv: Point2;
  direction_inward: number;
  depth: number;
  wire_length: number;
  wire_diameter: number;
}

export interface SessionStatePayload {
  phase: Phase;
  wire: WirePayload;
  counters: { xrays: number; trials: number };
  image_count: number;
  image_cursor: number;
  images: { current: RadiographDoc | null; previous: RadiographDoc | null };
}

export interface MetricsDoc {
  xray_count: number;
  trial_count: number;
  iatrogenic_level: number;
  duration: number;
  final_assessment: string;
}

export interface ReportPayload {
  assessment: string;
  metrics: MetricsDoc;
  lesson_id: string | null;
}

/** Response envelope of POST /sessions/{id}/commands and /confirm. */
export interface ApiEnvelope {
  state: SessionStatePayload;
  report?: ReportPayload;
  assessment?: string;
  metrics?: MetricsDoc;
  lesson_id?: string | null;
}

export interface CommandDoc {
  type: string;
  [key: string]: unknown;
}

export interface ApiRequestSpec {
  method: "GET" | "POST";
  path: string;
  body: Record<string, unknown> | null;
}
