/**
 * Helpers to spawn the Python environment server and supporting assets via
 * its CLI, so a training run is self-contained.
 */

import { ChildProcess, spawn, spawnSync } from "child_process";
import * as fs from "fs";
import * as path from "path";

import { EnvClient } from "./protocol";

const PYTHON = process.env.LOOKAROUND_PYTHON ?? "python3";

function run(args: string[]): void {
  const r = spawnSync(PYTHON, ["-m", "lookaround.cli", ...args], { stdio: "inherit" });
  if (r.status !== 0) throw new Error(`lookaround ${args[0]} failed (${r.status})`);
}

export function makePanoramas(dir: string, n: number, seed: number): void {
  fs.mkdirSync(dir, { recursive: true });
  for (let i = 0; i < n; i++) {
    const name = `pano-${String(i).padStart(3, "0")}.png`;
    run([
      "synth", "--kind", "grid-tags", "--size", "1024x512",
      "--seed", String(seed + i), "--out", path.join(dir, name),
    ]);
  }
}

export function makeEpisodes(
  panos: string,
  out: string,
  difficulty: string,
  nPerPano: number,
  seed: number,
  fov: number,
): number {
  run([
    "episodes", "--panos", panos, "--difficulty", difficulty,
    "--n-per-pano", String(nPerPano), "--fov", String(fov),
    "--seed", String(seed), "--out", out,
  ]);
  return fs.readFileSync(out, "utf-8").trim().split("\n").length;
}

export interface ServerHandle {
  proc: ChildProcess;
  port: number;
  connect(): Promise<EnvClient>;
  stop(): void;
}

export async function spawnServer(args: {
  panos: string;
  nEnvs: number;
  obsWidth: number;
  obsHeight: number;
  fov: number;
  seed: number;
  episodes?: string;
  difficulties?: string[];
  maxSteps?: number;
}): Promise<ServerHandle> {
  const port = 20000 + Math.floor(Math.random() * 20000);
  const cli = [
    "-m", "lookaround.cli", "serve",
    "--panos", args.panos,
    "--n-envs", String(args.nEnvs),
    "--port", String(port),
    "--obs-size", `${args.obsWidth}x${args.obsHeight}`,
    "--fov", String(args.fov),
    "--seed", String(args.seed),
  ];
  if (args.episodes) cli.push("--episodes", args.episodes);
  else cli.push("--difficulties", (args.difficulties ?? ["easy"]).join(","));
  if (args.maxSteps) cli.push("--max-steps", String(args.maxSteps));
  const proc = spawn(PYTHON, cli, { stdio: ["ignore", "inherit", "inherit"] });

  const connect = async (): Promise<EnvClient> => {
    let lastError: unknown;
    for (let attempt = 0; attempt < 60; attempt++) {
      await new Promise((r) => setTimeout(r, 250));
      try {
        return await EnvClient.connect("127.0.0.1", port);
      } catch (e) {
        lastError = e;
      }
    }
    throw new Error(`could not connect to spawned server: ${lastError}`);
  };

  return {
    proc,
    port,
    connect,
    stop: () => {
      proc.kill("SIGTERM");
    },
  };
}
