/**
 * End-to-end against a live environment server spawned through the Python
 * CLI: rollout collection, policy updates, determinism of frozen rollouts.
 */

import * as fs from "fs";
import * as os from "os";
import * as path from "path";

import * as tf from "@tensorflow/tfjs";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { initBackend } from "../src/backend";
import { DEFAULT_MODEL, PolicyModel } from "../src/model";
import { Adam, DEFAULT_TRAINING, ppoUpdate } from "../src/ppo";
import { EnvClient } from "../src/protocol";
import { Collector } from "../src/rollout";
import { Rng } from "../src/rng";
import { ServerHandle, makeEpisodes, makePanoramas, spawnServer } from "../src/servers";
import { validate } from "../src/validate";

const OBS = 48;
let workdir: string;
let panoDir: string;
let episodeFile: string;

beforeAll(async () => {
  await initBackend("cpu");
  workdir = fs.mkdtempSync(path.join(os.tmpdir(), "lookaround-it-"));
  panoDir = path.join(workdir, "panos");
  makePanoramas(panoDir, 2, 100);
  episodeFile = path.join(workdir, "episodes.jsonl");
  makeEpisodes(panoDir, episodeFile, "easy", 2, 5, 90);
});

function modelCfg() {
  return { ...DEFAULT_MODEL, obsWidth: OBS, obsHeight: OBS };
}

async function withServer<T>(
  args: { episodes?: string; nEnvs: number; maxSteps?: number },
  fn: (client: EnvClient) => Promise<T>,
): Promise<T> {
  const server: ServerHandle = await spawnServer({
    panos: panoDir,
    nEnvs: args.nEnvs,
    obsWidth: OBS,
    obsHeight: OBS,
    fov: 90,
    seed: 13,
    episodes: args.episodes,
    difficulties: ["easy"],
    maxSteps: args.maxSteps,
  });
  const client = await server.connect();
  try {
    return await fn(client);
  } finally {
    await client.close();
    server.stop();
  }
}

describe("training against a live server", () => {
  it("frozen policy with identical seeds reproduces rollout rewards", async () => {
    const collectRewards = async (): Promise<number[]> => {
      return withServer({ episodes: episodeFile, nEnvs: 2, maxSteps: 60 }, async (client) => {
        await client.handshake();
        const model = new PolicyModel(modelCfg(), 42);
        const collector = new Collector(model, client, 2, new Rng(99));
        await collector.start();
        const { buffer } = await collector.collect(12);
        return buffer.steps.flat().map((s) => s.reward);
      });
    };
    const a = await collectRewards();
    const b = await collectRewards();
    expect(a).toEqual(b);
    expect(a.length).toBe(24);
  }, 120_000);

  it("one update moves parameters in every component and keeps the policy valid", async () => {
    await withServer({ nEnvs: 2, maxSteps: 80 }, async (client) => {
      await client.handshake();
      const model = new PolicyModel(modelCfg(), 7);
      const before = new Map(
        Object.entries(model.vars).map(([k, v]) => [k, v.dataSync().slice()]),
      );
      const collector = new Collector(model, client, 2, new Rng(3));
      await collector.start();
      const cfg = {
        ...DEFAULT_TRAINING,
        nEnvs: 2,
        rolloutSteps: 10,
        nUpdates: 4,
        linearDecay: true,
      };
      const optimizer = new Adam();
      const { buffer, lastValues } = await collector.collect(cfg.rolloutSteps);
      const stats = ppoUpdate(model, buffer, lastValues, cfg, optimizer, 0);
      expect(Number.isFinite(stats.policyLoss)).toBe(true);
      expect(Number.isFinite(stats.valueLoss)).toBe(true);
      expect(stats.entropy).toBeGreaterThan(0);
      expect(stats.lr).toBeCloseTo(cfg.learningRate, 12);

      // gradient reached encoder, recurrent core, and both heads
      for (const name of ["conv0/w", "fc/w", "gru/wz", "actor/w", "critic/w"]) {
        const now = model.vars[name].dataSync();
        const prev = before.get(name)!;
        let delta = 0;
        for (let i = 0; i < now.length; i++) delta = Math.max(delta, Math.abs(now[i] - prev[i]));
        expect(delta).toBeGreaterThan(0);
      }

      // policy still a distribution after the update
      const obs = tf.zeros([1, OBS, OBS, 6]) as tf.Tensor4D;
      const { logits } = model.forward(obs, model.zeroState(1));
      const probs = await logits.softmax().data();
      const sum = Array.from(probs).reduce((x, y) => x + y, 0);
      expect(Math.abs(sum - 1)).toBeLessThan(1e-6);
    });
  }, 240_000);

  it("greedy validation of a frozen model is deterministic and traced", async () => {
    const model = new PolicyModel(modelCfg(), 11);
    const runOnce = async (trace: string) =>
      withServer({ episodes: episodeFile, nEnvs: 1, maxSteps: 40 }, async (client) => {
        await client.handshake();
        return validate(model, client, 4, 50, trace);
      });
    const tracePath = path.join(workdir, "val_trace.jsonl");
    const row = await runOnce(tracePath);
    expect(row.n).toBe(4);
    expect(row.eps).toBeGreaterThanOrEqual(0);
    expect(row.omegaStop).toBeGreaterThanOrEqual(0);
    expect(row.spl).toBeGreaterThanOrEqual(0);
    const lines = fs.readFileSync(tracePath, "utf-8").trim().split("\n");
    const types = lines.map((l) => JSON.parse(l).type);
    expect(types.filter((t) => t === "episode").length).toBe(4);
    expect(types.filter((t) => t === "end").length).toBe(4);

    const again = await runOnce(path.join(workdir, "val_trace2.jsonl"));
    expect(again).toEqual(row);
  }, 240_000);
});

describe("train CLI", () => {
  it("keeps an emergency checkpoint when the server connection drops", async () => {
    const { spawn } = await import("child_process");
    const server = await spawnServer({
      panos: panoDir, nEnvs: 2, obsWidth: OBS, obsHeight: OBS,
      fov: 90, seed: 21, difficulties: ["easy"], maxSteps: 100,
    });
    // make sure the server is accepting before training points at it
    const probe = await server.connect();
    await probe.close();
    const server2 = await spawnServer({
      panos: panoDir, nEnvs: 2, obsWidth: OBS, obsHeight: OBS,
      fov: 90, seed: 21, difficulties: ["easy"], maxSteps: 100,
    });
    await new Promise((r) => setTimeout(r, 1500));

    const out = path.join(workdir, "aborted-run");
    const trainer = spawn(
      "node",
      [
        path.join(__dirname, "..", "dist", "train.js"),
        "--host", "127.0.0.1", "--port", String(server2.port),
        "--n-envs", "2", "--rollout", "6", "--n-updates", "50",
        "--obs", `${OBS}x${OBS}`, "--out", out,
      ],
      { stdio: "ignore" },
    );
    const exited = new Promise<number | null>((resolve) => trainer.on("exit", resolve));
    // let it get through a couple of updates, then yank the server
    await new Promise((r) => setTimeout(r, 45_000));
    server2.stop();
    const code = await exited;
    server.stop();
    expect(code).not.toBe(0);
    expect(fs.existsSync(path.join(out, "checkpoint_aborted.json"))).toBe(true);
  }, 240_000);
});

afterAll(() => {
  fs.rmSync(workdir, { recursive: true, force: true });
});
