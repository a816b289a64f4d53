/**
 * Training entry point.
 *
 * Spawns environment servers through the Python CLI (or connects to an
 * existing one), collects recurrent rollouts, runs clipped policy updates
 * with linear lr/clip decay, walks the difficulty curriculum, validates on
 * a fixed episode file at a fixed cadence, and keeps the checkpoint with the
 * best validation localization error.
 *
 *   npm run train -- --panos data/panos --out runs/exp1
 *   npm run train:toy      # small self-contained run (~100k env steps)
 */

import * as fs from "fs";
import * as path from "path";

import { initBackend } from "./backend";
import { saveCheckpoint } from "./checkpoint";
import { DEFAULT_MODEL, PolicyModel } from "./model";
import { EnvClient } from "./protocol";
import { Adam, DEFAULT_TRAINING, TrainingConfig, ppoUpdate } from "./ppo";
import { Collector } from "./rollout";
import { Rng } from "./rng";
import { unlockedDifficulties } from "./scheduler";
import { makeEpisodes, makePanoramas, spawnServer } from "./servers";
import { validate } from "./validate";

interface Args extends TrainingConfig {
  host?: string;
  port?: number;
  panos?: string;
  out: string;
  obsWidth: number;
  obsHeight: number;
  fov: number;
  valEpisodesPerPano: number;
  valMaxSteps: number;
  toy: boolean;
}

function parseArgs(argv: string[]): Args {
  const args: Args = {
    ...DEFAULT_TRAINING,
    out: "runs/default",
    obsWidth: 256,
    obsHeight: 256,
    fov: 90,
    valEpisodesPerPano: 4,
    valMaxSteps: 600,
    toy: false,
  };
  const flags: Record<string, (v: string) => void> = {
    "--host": (v) => (args.host = v),
    "--port": (v) => (args.port = Number(v)),
    "--panos": (v) => (args.panos = v),
    "--out": (v) => (args.out = v),
    "--n-envs": (v) => (args.nEnvs = Number(v)),
    "--n-updates": (v) => (args.nUpdates = Number(v)),
    "--n-update": (v) => (args.nUpdateValidate = Number(v)),
    "--n-difficulty": (v) => (args.nDifficulty = Number(v)),
    "--rollout": (v) => (args.rolloutSteps = Number(v)),
    "--lr": (v) => (args.learningRate = Number(v)),
    "--gamma": (v) => (args.gamma = Number(v)),
    "--gae-lambda": (v) => (args.gaeLambda = Number(v)),
    "--clip": (v) => (args.clip = Number(v)),
    "--epochs": (v) => (args.ppoEpochs = Number(v)),
    "--value-coef": (v) => (args.valueCoef = Number(v)),
    "--entropy-coef": (v) => (args.entropyCoef = Number(v)),
    "--seed": (v) => (args.seed = Number(v)),
    "--obs": (v) => {
      const [w, h] = v.split("x").map(Number);
      args.obsWidth = w;
      args.obsHeight = h;
    },
    "--fov": (v) => (args.fov = Number(v)),
    "--val-max-steps": (v) => (args.valMaxSteps = Number(v)),
  };
  if (argv.includes("--toy")) {
    // 4 panoramas, easy only, ~19k env steps, small views: finishes on a CPU
    // even with the pure-JS backend. Explicit flags still override.
    args.toy = true;
    args.nEnvs = 4;
    args.nUpdates = 150;
    args.nUpdateValidate = 15;
    args.nDifficulty = 150; // easy throughout
    args.rolloutSteps = 32;
    args.obsWidth = 48;
    args.obsHeight = 48;
    args.valMaxSteps = 200;
    args.out = "runs/toy";
  }
  for (let i = 2; i < argv.length; i++) {
    const flag = argv[i];
    if (flag === "--toy") continue;
    const setter = flags[flag];
    if (!setter) throw new Error(`unknown flag ${flag}`);
    setter(argv[++i]);
  }
  if (args.nDifficulty <= 0) args.nDifficulty = Math.ceil(args.nUpdates / 3);
  return args;
}

async function main(): Promise<void> {
  const args = parseArgs(process.argv);
  const backend = await initBackend("cpu");
  console.log(`backend: ${backend}`);
  fs.mkdirSync(args.out, { recursive: true });

  let trainClient: EnvClient;
  let valServerFactory: (() => Promise<{ client: EnvClient; episodes: number; stop: () => void }>) | null = null;
  const cleanups: Array<() => void> = [];

  if (args.host && args.port) {
    trainClient = await EnvClient.connect(args.host, args.port);
  } else {
    const panoDir = args.panos ?? path.join(args.out, "panos");
    if (!args.panos) makePanoramas(panoDir, 4, args.seed);
    const valFile = path.join(args.out, "val_easy.jsonl");
    const valCount = makeEpisodes(
      panoDir, valFile, "easy", args.valEpisodesPerPano, args.seed + 1, args.fov,
    );
    const trainServer = await spawnServer({
      panos: panoDir,
      nEnvs: args.nEnvs,
      obsWidth: args.obsWidth,
      obsHeight: args.obsHeight,
      fov: args.fov,
      seed: args.seed,
      difficulties: unlockedDifficulties(0, args.nDifficulty),
    });
    cleanups.push(trainServer.stop);
    trainClient = await trainServer.connect();
    valServerFactory = async () => {
      const server = await spawnServer({
        panos: panoDir,
        nEnvs: 1,
        obsWidth: args.obsWidth,
        obsHeight: args.obsHeight,
        fov: args.fov,
        seed: args.seed,
        episodes: valFile,
      });
      return {
        client: await server.connect(),
        episodes: valCount,
        stop: server.stop,
      };
    };
  }

  const hs = await trainClient.handshake();
  console.log(`connected: ${hs.n_envs} envs, obs ${JSON.stringify(hs.obs_shape)}`);
  if (hs.n_envs !== args.nEnvs) args.nEnvs = hs.n_envs;
  const [, h, w] = hs.obs_shape;
  const model = new PolicyModel(
    { ...DEFAULT_MODEL, obsWidth: w, obsHeight: h }, args.seed,
  );
  console.log(`model: ${model.trainableCount()} parameters`);
  const optimizer = new Adam();
  const collector = new Collector(model, trainClient, args.nEnvs, new Rng(args.seed + 7));
  await collector.start();

  const log: string[] = [];
  let bestEps = Infinity;
  let phase = 0;
  let update = 0;
  const emergency = (err: unknown) => {
    // connection loss or a crashed server: keep the weights, then surface
    saveCheckpoint(
      path.join(args.out, "checkpoint_aborted.json"), model, args,
      { updateIndex: update },
    );
    fs.writeFileSync(path.join(args.out, "train_log.jsonl"), log.join("\n") + "\n");
    console.error(`aborted at update ${update}; weights in checkpoint_aborted.json`);
    throw err;
  };
  for (update = 0; update < args.nUpdates; update++) {
    const mix = unlockedDifficulties(update, args.nDifficulty);
    if (mix.length !== phase + 1 && update > 0) {
      await trainClient.setDifficulties(mix);
      console.log(`update ${update}: difficulties now ${mix.join(",")}`);
    }
    phase = mix.length - 1;

    let buffer, lastValues;
    try {
      ({ buffer, lastValues } = await collector.collect(args.rolloutSteps));
    } catch (err) {
      emergency(err);
      return;
    }
    const stats = ppoUpdate(model, buffer, lastValues, args, optimizer, update);
    const returns = collector.drainReturns();
    const meanReturn = returns.length
      ? returns.reduce((a, b) => a + b, 0) / returns.length
      : NaN;
    const line = JSON.stringify({
      type: "update", update, meanReturn, episodes: returns.length, ...stats,
    });
    log.push(line);
    if (update % 5 === 0 || update === args.nUpdates - 1) console.log(line);

    const lastUpdate = update === args.nUpdates - 1;
    if (valServerFactory && ((update + 1) % args.nUpdateValidate === 0 || lastUpdate)) {
      const val = await valServerFactory();
      const row = await validate(
        model, val.client, val.episodes, args.valMaxSteps,
        path.join(args.out, `val_trace_${update + 1}.jsonl`),
      );
      await val.client.close();
      val.stop();
      const valLine = JSON.stringify({ type: "validation", update, ...row });
      log.push(valLine);
      console.log(valLine);
      saveCheckpoint(
        path.join(args.out, `checkpoint_${update + 1}.json`), model, args,
        { updateIndex: update, valEps: row.eps, valReward: row.meanReward },
      );
      if (row.eps <= bestEps) {
        bestEps = row.eps;
        saveCheckpoint(
          path.join(args.out, "checkpoint_best.json"), model, args,
          { updateIndex: update, valEps: row.eps, valReward: row.meanReward },
        );
      }
    }
    fs.writeFileSync(path.join(args.out, "train_log.jsonl"), log.join("\n") + "\n");
  }

  await trainClient.close();
  cleanups.forEach((stop) => stop());
  console.log(`done; best validation eps ${bestEps}`);
}

main().catch((e) => {
  console.error(e);
  process.exit(1);
});
