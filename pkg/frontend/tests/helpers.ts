import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";

export function fixturePath(rel: string): string {
  return fileURLToPath(new URL(`./fixtures/${rel}`, import.meta.url));
}

export function fixtureText(rel: string): string {
  return readFileSync(fixturePath(rel), "utf8");
}

// Data portion of an artifact file: everything that is not a comment line.
export function bodyLines(text: string): string[] {
  return text
    .slice(0, -1)
    .split("\n")
    .filter((line) => !line.startsWith("#"));
}

export function count(haystack: string, needle: string): number {
  return haystack.split(needle).length - 1;
}
