/**
 * Client view state and the single reducer that coordinates the
 * linked views. The reducer is pure: it never talks to the network,
 * and every selection it admits must reference an entity present in
 * the latest server snapshot (stale selections reset with a notice).
 */

export type Screen = "configuration" | "analysis";

export interface ServerSnapshot {
  columns: string[];
  surfaces: string[];
  indicators: string[];
  paragraphIds: string[];
  regionIds: string[];
  /** converged job id; changes exactly when a retrain lands */
  modelEpoch: number | null;
}

export interface ViewState {
  screen: Screen;
  dependent: string | null;
  independents: string[];
  indicator: string | null;
  surface: string | null;
  hoveredParagraph: string | null;
  keyphraseParagraph: string | null;
  selectedRegions: string[];
  reportExpanded: boolean;
  notice: string | null;
  epoch: number | null;
}

export type ViewEvent =
  | { type: "switch_screen"; screen: Screen }
  | { type: "assign_variable"; role: "dependent" | "independent"; name: string }
  | { type: "unassign_variable"; name: string }
  | { type: "select_indicator"; indicator: string | null }
  | { type: "select_surface"; surface: string | null }
  | { type: "hover_paragraph"; paragraphId: string | null }
  | { type: "click_paragraph"; paragraphId: string }
  | { type: "select_regions"; regionIds: string[] }
  | { type: "toggle_report" }
  | { type: "retrained"; epoch: number }
  | { type: "dismiss_notice" };

export function initialViewState(): ViewState {
  return {
    screen: "configuration",
    dependent: null,
    independents: [],
    indicator: null,
    surface: null,
    hoveredParagraph: null,
    keyphraseParagraph: null,
    selectedRegions: [],
    reportExpanded: false,
    notice: null,
    epoch: null,
  };
}

export function coordinateViews(
  state: ViewState,
  event: ViewEvent,
  snapshot: ServerSnapshot,
): ViewState {
  switch (event.type) {
    case "switch_screen":
      return { ...state, screen: event.screen };
    case "assign_variable": {
      if (!snapshot.columns.includes(event.name)) return state;
      if (event.role === "dependent") {
        return {
          ...state,
          dependent: event.name,
          independents: state.independents.filter((n) => n !== event.name),
        };
      }
      if (state.independents.includes(event.name)) return state;
      return {
        ...state,
        independents: [...state.independents, event.name],
        dependent: state.dependent === event.name ? null : state.dependent,
      };
    }
    case "unassign_variable":
      return {
        ...state,
        dependent: state.dependent === event.name ? null : state.dependent,
        independents: state.independents.filter((n) => n !== event.name),
      };
    case "select_indicator":
      if (event.indicator !== null && !snapshot.indicators.includes(event.indicator)) {
        return state;
      }
      return { ...state, indicator: event.indicator };
    case "select_surface":
      if (event.surface !== null && !snapshot.surfaces.includes(event.surface)) {
        return state;
      }
      return { ...state, surface: event.surface };
    case "hover_paragraph":
      if (
        event.paragraphId !== null &&
        !snapshot.paragraphIds.includes(event.paragraphId)
      ) {
        return state;
      }
      return { ...state, hoveredParagraph: event.paragraphId };
    case "click_paragraph":
      if (!snapshot.paragraphIds.includes(event.paragraphId)) return state;
      return { ...state, keyphraseParagraph: event.paragraphId };
    case "select_regions": {
      const known = new Set(snapshot.regionIds);
      return {
        ...state,
        selectedRegions: event.regionIds.filter((r) => known.has(r)),
      };
    }
    case "toggle_report":
      return { ...state, reportExpanded: !state.reportExpanded };
    case "retrained": {
      if (state.epoch === null) {
        return { ...state, epoch: event.epoch };
      }
      if (state.epoch === event.epoch) return state;
      // model changed under the open analysis: drop model-scoped selections
      return {
        ...state,
        indicator: null,
        surface: null,
        hoveredParagraph: null,
        keyphraseParagraph: null,
        selectedRegions: [],
        epoch: event.epoch,
        notice: "Model retrained; selections were reset.",
      };
    }
    case "dismiss_notice":
      return { ...state, notice: null };
  }
}
