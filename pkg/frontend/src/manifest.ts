/** Panel manifest schema: what to plot from which CSV into which file. */

import { z } from "zod";

export const seriesSchema = z.object({
  column: z.string(),
  label: z.string(),
});

export const hlineSchema = z
  .object({
    column: z.string().optional(),
    value: z.number().optional(),
    label: z.string().optional(),
  })
  .refine((h) => (h.column === undefined) !== (h.value === undefined), {
    message: "hline needs exactly one of 'column' or 'value'",
  });

export const panelSchema = z.object({
  csv: z.string(),
  x: z.string(),
  series: z.array(seriesSchema).min(1),
  kind: z.enum(["timeseries", "loglog"]),
  out: z.string(),
  title: z.string().optional(),
  group_by: z.string().optional(),
  hlines: z.array(hlineSchema).optional(),
});

export const manifestSchema = z.object({
  panels: z.array(panelSchema),
});

export type Series = z.infer<typeof seriesSchema>;
export type HLine = z.infer<typeof hlineSchema>;
export type PanelSpec = z.infer<typeof panelSchema>;
export type Manifest = z.infer<typeof manifestSchema>;

export function parseManifest(jsonText: string): Manifest {
  const data: unknown = JSON.parse(jsonText);
  return manifestSchema.parse(data);
}
