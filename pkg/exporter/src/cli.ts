#!/usr/bin/env node
/**
 * Command line entry point.
 *
 *   pvpe-export export --model <id> --texts <file>|--images <dir> \
 *       --role <tag> --out <path> [--batch-size <n>]
 *
 * Exit codes: 0 success, 1 bad input or arguments, 2 runtime failure
 * (including an unavailable embedding model).
 */

import { realpathSync } from 'node:fs';
import { pathToFileURL } from 'node:url';
import { parseArgs } from 'node:util';

import { ModelUnavailableError } from './embedder.js';
import { InputError, exportImageEmbeddings, exportTextEmbeddings } from './export.js';
import { FormatError, ParameterError, ROLES } from './pvpe.js';
import type { Role } from './pvpe.js';

export const EXIT_OK = 0;
export const EXIT_INPUT = 1;
export const EXIT_RUNTIME = 2;

const USAGE = `usage: pvpe-export export --model <id> --texts <file>|--images <dir> --role <tag> --out <path> [--batch-size <n>]

Embeds one text per line (or one image per file, sorted by filename) and
writes a PVPE embedding file with a .labels sidecar.

  --model       embedder id, e.g. dhash/1024
  --texts       input text file, one item per line
  --images      input directory of P5/P6 netpbm images
  --role        one of: ${ROLES.join(', ')}
  --out         output .pvpe path
  --batch-size  rows per inference batch (default 32)
`;

class UsageError extends Error {}

interface ParsedCommand {
  model: string;
  role: Role;
  out: string;
  batchSize: number;
  texts?: string;
  images?: string;
}

function parseCommand(argv: string[]): ParsedCommand | 'help' {
  if (argv.includes('--help') || argv.includes('-h')) {
    return 'help';
  }
  if (argv.length === 0 || argv[0] !== 'export') {
    throw new UsageError(
      argv.length === 0 ? 'missing command' : `unknown command '${argv[0]}'`,
    );
  }
  let parsed;
  try {
    parsed = parseArgs({
      args: argv.slice(1),
      options: {
        model: { type: 'string' },
        texts: { type: 'string' },
        images: { type: 'string' },
        role: { type: 'string' },
        out: { type: 'string' },
        'batch-size': { type: 'string' },
      },
      allowPositionals: false,
    });
  } catch (err) {
    throw new UsageError(err instanceof Error ? err.message : String(err));
  }
  const values = parsed.values;
  for (const required of ['model', 'role', 'out'] as const) {
    if (values[required] === undefined) {
      throw new UsageError(`--${required} is required`);
    }
  }
  if ((values.texts === undefined) === (values.images === undefined)) {
    throw new UsageError('exactly one of --texts or --images is required');
  }
  const role = values.role as string;
  if (!(ROLES as readonly string[]).includes(role)) {
    throw new UsageError(`--role must be one of: ${ROLES.join(', ')}`);
  }
  const batchSize = values['batch-size'] === undefined ? 32 : Number(values['batch-size']);
  if (!Number.isInteger(batchSize) || batchSize < 1) {
    throw new UsageError(`--batch-size must be a positive integer, got '${values['batch-size']}'`);
  }
  return {
    model: values.model as string,
    role: role as Role,
    out: values.out as string,
    batchSize,
    texts: values.texts,
    images: values.images,
  };
}

export function runCli(argv: string[]): number {
  let command: ParsedCommand;
  try {
    const parsed = parseCommand(argv);
    if (parsed === 'help') {
      console.log(USAGE);
      return EXIT_OK;
    }
    command = parsed;
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(USAGE);
      console.error(`error: ${err.message}`);
      return EXIT_INPUT;
    }
    throw err;
  }
  const job = {
    model: command.model,
    role: command.role,
    out: command.out,
    batchSize: command.batchSize,
  };
  try {
    const summary =
      command.texts !== undefined
        ? exportTextEmbeddings(job, command.texts)
        : exportImageEmbeddings(job, command.images as string);
    const skippedNote = summary.skipped > 0 ? ` skipped=${summary.skipped}` : '';
    console.log(
      `wrote ${summary.path}: rows=${summary.rows} dim=${summary.dim} role=${summary.role}${skippedNote}`,
    );
    return EXIT_OK;
  } catch (err) {
    if (err instanceof ModelUnavailableError) {
      console.error(`error: ${err.message}`);
      return EXIT_RUNTIME;
    }
    if (
      err instanceof InputError ||
      err instanceof FormatError ||
      err instanceof ParameterError ||
      (err as NodeJS.ErrnoException).code !== undefined
    ) {
      console.error(`error: ${err instanceof Error ? err.message : String(err)}`);
      return EXIT_INPUT;
    }
    console.error(`error: ${err instanceof Error ? err.message : String(err)}`);
    return EXIT_RUNTIME;
  }
}

const isMainModule =
  process.argv[1] !== undefined &&
  import.meta.url === pathToFileURL(realpathSync(process.argv[1])).href;

if (isMainModule) {
  process.exit(runCli(process.argv.slice(2)));
}
