/*
Text dump of a parsed document: the header followed by every data row
rebuilt from the raw field tokens. Comment lines are dropped, numbers are
reproduced byte for byte, so two runs can be diffed without worrying about
reformatting.
*/

export interface Dumpable {
  header: string;
  rows: string[][];
}

export function dumpDocument(doc: Dumpable): string {
  const lines = [doc.header];
  for (const row of doc.rows) {
    lines.push(row.join(","));
  }
  return lines.join("\n") + "\n";
}
