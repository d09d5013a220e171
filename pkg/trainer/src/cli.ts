/** Command line for training, weight init, and cross-runtime checks. */

import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { ensureBackend } from "./backend.js";
import { Autoencoder } from "./model.js";
import { DEFAULT_CONFIG, train } from "./train.js";
import { runExportCheck } from "./export_check.js";

async function main(): Promise<void> {
  await yargs(hideBin(process.argv))
    .scriptName("relay-cnn-trainer")
    .command(
      "train",
      "train the autoencoder on a dataset directory and export weights",
      (y) =>
        y
          .option("dataset", { type: "string", demandOption: true, describe: "dataset dir" })
          .option("out", { type: "string", demandOption: true, describe: "weight file out" })
          .option("metrics", { type: "string", default: "metrics.csv" })
          .option("epochs", { type: "number", default: DEFAULT_CONFIG.epochs })
          .option("batch-size", { type: "number", default: DEFAULT_CONFIG.batchSize })
          .option("learning-rate", { type: "number", default: DEFAULT_CONFIG.learningRate })
          .option("seed", { type: "number", default: DEFAULT_CONFIG.seed })
          .option("validation-fraction", {
            type: "number",
            default: DEFAULT_CONFIG.validationFraction,
          }),
      async (argv) => {
        const backend = await ensureBackend();
        console.log(`backend: ${backend}`);
        const started = Date.now();
        const result = await train(
          argv.dataset,
          {
            learningRate: argv["learning-rate"],
            batchSize: argv["batch-size"],
            epochs: argv.epochs,
            seed: argv.seed,
            validationFraction: argv["validation-fraction"],
          },
          argv.out,
          argv.metrics,
          {
            onStep: (epoch, step, loss) => {
              if (step % 25 === 0) {
                console.log(`epoch ${epoch} step ${step} loss ${loss.toExponential(4)}`);
              }
            },
          },
        );
        for (const m of result.metrics) {
          console.log(`epoch ${m.epoch}: train_mse=${m.trainMse} val_mse=${m.valMse}`);
        }
        console.log(
          `trained on ${result.trainCount} samples (${result.valCount} validation) ` +
            `in ${((Date.now() - started) / 1000).toFixed(1)} s; wrote ${argv.out}`,
        );
      },
    )
    .command(
      "init",
      "write untrained fan-in scaled weights (plumbing and benchmarks)",
      (y) =>
        y
          .option("out", { type: "string", demandOption: true })
          .option("seed", { type: "number", default: 0 }),
      async (argv) => {
        await ensureBackend();
        const model = Autoencoder.init(argv.seed);
        model.saveFile(argv.out);
        model.dispose();
        console.log(`wrote ${argv.out}`);
      },
    )
    .command(
      "export-check",
      "compare this forward pass against the reference runtime CLI",
      (y) =>
        y
          .option("weights", { type: "string", demandOption: true })
          .option("dataset", { type: "string", demandOption: true })
          .option("count", { type: "number", default: 10 })
          .option("python", {
            type: "string",
            default: "python3 -m relaykit.cli",
            describe: "reference CLI command prefix",
          })
          .option("tolerance", { type: "number", default: 1e-4 }),
      async (argv) => {
        await ensureBackend();
        const report = runExportCheck(argv.weights, argv.dataset, {
          count: argv.count,
          pythonCmd: argv.python.split(/\s+/),
          tolerance: argv.tolerance,
        });
        for (const probe of report.probes) {
          console.log(`${probe.id}: max |diff| = ${probe.maxAbsDiff.toExponential(3)}`);
        }
        console.log(
          `export check passed: max |diff| ${report.maxAbsDiff.toExponential(3)} <= ${report.tolerance}`,
        );
      },
    )
    .demandCommand(1)
    .strict()
    .fail((msg, err) => {
      console.error(msg ?? err?.message ?? String(err));
      process.exit(1);
    })
    .parseAsync();
}

main().catch((err) => {
  console.error(err instanceof Error ? err.message : String(err));
  process.exit(1);
});
