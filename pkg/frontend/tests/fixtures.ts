import type { ChatResponse, GeoFeatureDocument } from "../src/types";

export const tableResponse: ChatResponse = {
  session_id: "s-1",
  answer_text: "Route 18 serves four municipalities.",
  sql: "select distinct m.name from municipalities m",
  rows: {
    columns: ["name"],
    data: [["Bologna"], ["San Lazzaro di Savena"], ["Milano"], ["Assago"]],
  },
  map_id: null,
  assumptions: ["Only services active on the current date are considered."],
  error: null,
};

export const scalarResponse: ChatResponse = {
  session_id: "s-1",
  answer_text: "The agency of Bologna manages 4 routes.",
  sql: "select count(distinct r.route_id) from routes r",
  rows: { columns: ["count(distinct r.route_id)"], data: [[4]] },
  map_id: null,
  assumptions: [],
  error: null,
};

export const errorResponse: ChatResponse = {
  session_id: "s-1",
  answer_text: "I could not produce a valid query for this question, so I do not know the answer.",
  sql: "select x.name from municipalities",
  rows: null,
  map_id: null,
  assumptions: [],
  error: { code: "GUARD_REJECTED", message: "the generated query is invalid" },
};

export const mapResponse: ChatResponse = {
  session_id: "s-1",
  answer_text: "Here is the map of line 18.",
  sql: "select agency_id, route_id from routes where short_name = '18'",
  rows: { columns: ["agency_id", "route_id"], data: [["brt", "18"]] },
  map_id: "map-18",
  assumptions: [],
  error: null,
};

export const routeDocument: GeoFeatureDocument = {
  type: "FeatureCollection",
  features: [
    {
      type: "Feature",
      geometry: {
        type: "LineString",
        coordinates: [
          [11.295, 44.49],
          [11.31, 44.5],
          [11.343, 44.494],
          [11.42, 44.47],
        ],
      },
      properties: { agency_id: "brt", route_id: "18", direction: "andata" },
    },
    {
      type: "Feature",
      geometry: { type: "Point", coordinates: [11.295, 44.49] },
      properties: { name: "Barca" },
    },
    {
      type: "Feature",
      geometry: { type: "Point", coordinates: [11.343, 44.494] },
      properties: { name: "Piazza Maggiore" },
    },
    {
      type: "Feature",
      geometry: { type: "Point", coordinates: [11.42, 44.47] },
      properties: { name: "San Lazzaro Centro" },
    },
  ],
};
