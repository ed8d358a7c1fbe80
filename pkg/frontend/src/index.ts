export { parseCsv, numericColumn, distinct, rowsWhere } from "./csv.js";
export { fitLogLogSlope } from "./slope.js";
export { parseManifest, manifestSchema, panelSchema } from "./manifest.js";
export type { Manifest, PanelSpec, Series, HLine } from "./manifest.js";
export { renderPanels } from "./render.js";
export type { RenderReport, PanelResult } from "./render.js";
