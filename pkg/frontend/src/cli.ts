#!/usr/bin/env node
/** mfg-habitat-render render --manifest PATH --out DIR */

import * as fs from "node:fs";
import * as path from "node:path";

import { parseManifest } from "./manifest.js";
import { renderPanels } from "./render.js";

function usage(): never {
  process.stderr.write("usage: mfg-habitat-render render --manifest PATH --out DIR\n");
  process.exit(2);
}

export function main(argv: string[]): number {
  if (argv[0] !== "render") usage();
  let manifestPath: string | undefined;
  let outDir: string | undefined;
  for (let i = 1; i < argv.length; i += 2) {
    if (argv[i] === "--manifest") manifestPath = argv[i + 1];
    else if (argv[i] === "--out") outDir = argv[i + 1];
    else usage();
  }
  if (!manifestPath || !outDir) usage();

  const manifest = parseManifest(fs.readFileSync(manifestPath, "utf-8"));
  if (manifest.panels.length === 0) {
    process.stdout.write("empty manifest: nothing to render\n");
    return 0;
  }
  const report = renderPanels(manifest, path.dirname(path.resolve(manifestPath)), outDir);
  for (const r of report.results) {
    process.stdout.write(r.ok ? `rendered ${r.out}\n` : `FAILED ${r.out}: ${r.error}\n`);
  }
  return report.ok ? 0 : 1;
}

const isMain = process.argv[1] !== undefined && import.meta.url === `file://${path.resolve(process.argv[1])}`;
if (isMain) process.exit(main(process.argv.slice(2)));
