import type { GeoFeatureDocument } from "./types";

export const VIEW_WIDTH = 640;
export const VIEW_HEIGHT = 400;
const TILE_SIZE = 256;
const MAX_ZOOM = 18;
const SVG_NS = "http://www.w3.org/2000/svg";

interface ParsedGeometry {
  line: [number, number][]; // [lon, lat]
  stops: { name: string; lon: number; lat: number }[];
}

function parseDocument(doc: GeoFeatureDocument): ParsedGeometry {
  if (doc?.type !== "FeatureCollection" || !Array.isArray(doc.features)) {
    throw new Error("not a FeatureCollection");
  }
  if (doc.features.length === 0) {
    return { line: [], stops: [] };
  }
  const [first, ...rest] = doc.features;
  if (first.geometry?.type !== "LineString") {
    throw new Error("first feature must be a LineString");
  }
  const line = (first.geometry.coordinates as [number, number][]).map(([lon, lat]) => {
    if (typeof lon !== "number" || typeof lat !== "number") {
      throw new Error("bad LineString coordinate");
    }
    return [lon, lat] as [number, number];
  });
  const stops = rest.map((feature) => {
    if (feature.geometry?.type !== "Point") throw new Error("stop features must be Points");
    const [lon, lat] = feature.geometry.coordinates as [number, number];
    if (typeof lon !== "number" || typeof lat !== "number") {
      throw new Error("bad Point coordinate");
    }
    return { name: String(feature.properties?.name ?? ""), lon, lat };
  });
  return { line, stops };
}

// Web Mercator world-pixel coordinates at a zoom level.
function worldX(lon: number, zoom: number): number {
  return ((lon + 180) / 360) * TILE_SIZE * 2 ** zoom;
}

function worldY(lat: number, zoom: number): number {
  const rad = (lat * Math.PI) / 180;
  const clamped = Math.max(-0.9999, Math.min(0.9999, Math.sin(rad)));
  const y = 0.5 - Math.log((1 + clamped) / (1 - clamped)) / (4 * Math.PI);
  return y * TILE_SIZE * 2 ** zoom;
}

function fitZoom(lons: number[], lats: number[]): number {
  const spanX = worldX(Math.max(...lons), 0) - worldX(Math.min(...lons), 0);
  const spanY = worldY(Math.min(...lats), 0) - worldY(Math.max(...lats), 0);
  for (let zoom = MAX_ZOOM; zoom >= 1; zoom--) {
    if (spanX * 2 ** zoom <= VIEW_WIDTH * 0.9 && spanY * 2 ** zoom <= VIEW_HEIGHT * 0.9) {
      return zoom;
    }
  }
  return 1;
}

function errorPlaceholder(container: HTMLElement, reason: string): void {
  container.replaceChildren();
  const placeholder = document.createElement("div");
  placeholder.className = "map-error";
  placeholder.textContent = `Map unavailable: ${reason}`;
  container.appendChild(placeholder);
}

/**
 * Draw the route document into `container`: optional slippy tiles under an
 * SVG overlay with the shape polyline and one marker per stop.  Marker
 * tooltips (SVG <title>) show the stop name on hover; the viewport is
 * fitted to the geometry bounds.
 */
export function renderMap(
  container: HTMLElement,
  doc: GeoFeatureDocument,
  tileUrlTemplate?: string,
): void {
  let parsed: ParsedGeometry;
  try {
    parsed = parseDocument(doc);
  } catch (error) {
    errorPlaceholder(container, error instanceof Error ? error.message : String(error));
    return;
  }
  if (parsed.line.length === 0 && parsed.stops.length === 0) {
    errorPlaceholder(container, "empty geometry");
    return;
  }

  const lons = [...parsed.line.map(([lon]) => lon), ...parsed.stops.map((s) => s.lon)];
  const lats = [...parsed.line.map(([, lat]) => lat), ...parsed.stops.map((s) => s.lat)];
  const zoom = fitZoom(lons, lats);
  const centerX = (worldX(Math.min(...lons), zoom) + worldX(Math.max(...lons), zoom)) / 2;
  const centerY = (worldY(Math.min(...lats), zoom) + worldY(Math.max(...lats), zoom)) / 2;
  const offsetX = centerX - VIEW_WIDTH / 2;
  const offsetY = centerY - VIEW_HEIGHT / 2;
  const toView = (lon: number, lat: number): [number, number] => [
    worldX(lon, zoom) - offsetX,
    worldY(lat, zoom) - offsetY,
  ];

  container.replaceChildren();
  const view = document.createElement("div");
  view.className = "map-view";
  view.style.width = `${VIEW_WIDTH}px`;
  view.style.height = `${VIEW_HEIGHT}px`;
  container.appendChild(view);

  if (tileUrlTemplate) {
    const tiles = document.createElement("div");
    tiles.className = "tiles";
    const maxTile = 2 ** zoom - 1;
    const firstX = Math.max(0, Math.floor(offsetX / TILE_SIZE));
    const lastX = Math.min(maxTile, Math.floor((offsetX + VIEW_WIDTH) / TILE_SIZE));
    const firstY = Math.max(0, Math.floor(offsetY / TILE_SIZE));
    const lastY = Math.min(maxTile, Math.floor((offsetY + VIEW_HEIGHT) / TILE_SIZE));
    for (let x = firstX; x <= lastX; x++) {
      for (let y = firstY; y <= lastY; y++) {
        const img = document.createElement("img");
        img.className = "tile";
        img.alt = "";
        img.src = tileUrlTemplate
          .replace("{z}", String(zoom))
          .replace("{x}", String(x))
          .replace("{y}", String(y));
        img.style.left = `${x * TILE_SIZE - offsetX}px`;
        img.style.top = `${y * TILE_SIZE - offsetY}px`;
        tiles.appendChild(img);
      }
    }
    view.appendChild(tiles);
  }

  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("class", "overlay");
  svg.setAttribute("viewBox", `0 0 ${VIEW_WIDTH} ${VIEW_HEIGHT}`);
  svg.setAttribute("width", String(VIEW_WIDTH));
  svg.setAttribute("height", String(VIEW_HEIGHT));

  if (parsed.line.length > 0) {
    const polyline = document.createElementNS(SVG_NS, "polyline");
    polyline.setAttribute("class", "shape");
    polyline.setAttribute(
      "points",
      parsed.line.map(([lon, lat]) => toView(lon, lat).map((v) => v.toFixed(1)).join(",")).join(" "),
    );
    svg.appendChild(polyline);
  }

  for (const stop of parsed.stops) {
    const [cx, cy] = toView(stop.lon, stop.lat);
    const marker = document.createElementNS(SVG_NS, "circle");
    marker.setAttribute("class", "marker");
    marker.setAttribute("cx", cx.toFixed(1));
    marker.setAttribute("cy", cy.toFixed(1));
    marker.setAttribute("r", "5");
    const tooltip = document.createElementNS(SVG_NS, "title");
    tooltip.textContent = stop.name;
    marker.appendChild(tooltip);
    svg.appendChild(marker);
  }
  view.appendChild(svg);
}
