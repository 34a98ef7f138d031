#!/usr/bin/env node
import { parseInputSpec } from "./csv.js";
import { Kind, KINDS, renderChart, writeImage } from "./render.js";

function usage(): never {
  console.error(
    "usage: render --kind <backhaul-sweep|rate-vs-secrecy> " +
    "--in <csv[:label][,csv[:label]...]> --out <file.svg|file.png> " +
    "[--width px] [--height px]");
  process.exit(2);
}

export async function main(argv: string[]): Promise<number> {
  const args = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith("--") || i + 1 >= argv.length) usage();
    args.set(key.slice(2), argv[i + 1]);
  }
  const kind = args.get("kind");
  const input = args.get("in");
  const out = args.get("out");
  if (!kind || !input || !out) usage();
  if (!(KINDS as readonly string[]).includes(kind)) {
    console.error(`error: unknown kind '${kind}'`);
    return 2;
  }
  try {
    const result = renderChart(
      kind as Kind, parseInputSpec(input),
      args.has("width") ? Number(args.get("width")) : undefined,
      args.has("height") ? Number(args.get("height")) : undefined);
    for (const warning of result.warnings) {
      console.warn(`warning: ${warning}`);
    }
    await writeImage(result.svg, out);
    console.log(`wrote ${out} (${result.seriesCount} series)`);
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

const isMain = process.argv[1] && import.meta.url.endsWith(
  process.argv[1].split("/").pop() ?? "");
if (isMain) {
  main(process.argv.slice(2)).then((code) => process.exit(code));
}
