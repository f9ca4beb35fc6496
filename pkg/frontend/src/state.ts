/**
 * View-state container and transitions.
 *
 * The one invariant that matters: a post table is only ever *displayable*
 * when it was computed for the constraint revision the view currently sits
 * at. The service enforces this on its side too; the client mirrors it so a
 * race (solve response landing after an edit) can never paint stale numbers.
 */

import type { ConstraintDoc, TablesResponse } from "./api";

export type SolveChip = "idle" | "solving" | "exact" | "closest" | "infeasible" | "error";

export interface ViewState {
  fixture: string | null;
  sessionId: string | null;
  constraints: ConstraintDoc[];
  revision: number;
  tables: TablesResponse | null;
  chip: SolveChip;
  postStale: boolean;
  solveInFlight: boolean;
  banner: string | null;
}

export function initialState(): ViewState {
  return {
    fixture: null,
    sessionId: null,
    constraints: [],
    revision: 0,
    tables: null,
    chip: "idle",
    postStale: false,
    solveInFlight: false,
    banner: null,
  };
}

export function fixtureLoaded(
  state: ViewState,
  fixture: string,
  sessionId: string,
  tables: TablesResponse,
  constraints: ConstraintDoc[],
): ViewState {
  return {
    ...state,
    fixture,
    sessionId,
    constraints,
    revision: tables.revision,
    tables,
    chip: "idle",
    postStale: false,
    solveInFlight: false,
    banner: null,
  };
}

export function constraintsApplied(state: ViewState, revision: number,
                                   constraints: ConstraintDoc[]): ViewState {
  // the previous solution no longer matches what the user is asking for
  return { ...state, constraints, revision, postStale: true, chip: "idle" };
}

export function solveStarted(state: ViewState): ViewState {
  return { ...state, solveInFlight: true, chip: "solving", banner: null };
}

export function solveFinished(state: ViewState, status: string,
                              tables: TablesResponse): ViewState {
  const chip: SolveChip = status === "exact" ? "exact" : "closest";
  return {
    ...state,
    tables,
    revision: tables.revision,
    chip,
    postStale: false,
    solveInFlight: false,
  };
}

export function solveFailed(state: ViewState, banner: string,
                            infeasible: boolean): ViewState {
  return {
    ...state,
    solveInFlight: false,
    chip: infeasible ? "infeasible" : "error",
    banner,
  };
}

export function bannerRaised(state: ViewState, banner: string): ViewState {
  return { ...state, banner };
}

/** The revision-safety gate: everything that renders a post table asks here. */
export function displayablePost(state: ViewState) {
  const post = state.tables?.post;
  if (!post) {
    return null;
  }
  if (state.postStale) {
    return null;
  }
  if (post.revision !== undefined && post.revision !== state.revision) {
    return null;
  }
  return post;
}

/** Client-side constraint validation mirroring the service's rules. */
export function constraintProblem(doc: ConstraintDoc): string | null {
  const bounds: number[] = [];
  if (doc.op === "interval") {
    if (doc.low === undefined || doc.high === undefined) {
      return "interval needs both bounds";
    }
    if (doc.low > doc.high) {
      return `empty interval [${doc.low}, ${doc.high}]`;
    }
    bounds.push(doc.low, doc.high);
  } else {
    if (doc.value === undefined) {
      return "missing bound value";
    }
    bounds.push(doc.value);
  }
  for (const b of bounds) {
    if (Number.isNaN(b) || b < 0 || b > 1) {
      return `bound ${b} outside [0, 1]`;
    }
  }
  if (Object.keys(doc.event).length === 0) {
    return "constraint needs an event";
  }
  return null;
}
