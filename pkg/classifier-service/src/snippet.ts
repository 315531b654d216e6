/**
 * Parser for the engine's snippet grammar (docs/snippet-format.md in the
 * repository root): regions labeled with start addresses and closed by end
 * comments, conflict-marker alternatives, verdict comments, and db lines.
 *
 * Given a per-offset decode table (length + text for every region offset),
 * the parser resolves each instruction line to its address without knowing
 * anything about x86 itself.
 */

export interface DecodeTable {
  base: number;
  rows: [number, string][]; // [length, text] for every byte offset
}

export interface LineAddress {
  start: number; // character offset of the line in the snippet text
  end: number;
  address: number;
  text: string; // instruction text without any verdict comment
}

const CONFLICT_MARKS = new Set(["<<<<<<<", "=======", ">>>>>>>"]);
const VERDICTS = [" ; valid", " ; invalid"];

export function stripVerdict(line: string): string {
  for (const suffix of VERDICTS) {
    if (line.endsWith(suffix)) {
      return line.slice(0, -suffix.length);
    }
  }
  return line;
}

export function parseSnippet(text: string, table: DecodeTable): LineAddress[] {
  const out: LineAddress[] = [];
  let offset = 0;
  let address: number | null = null;
  for (const line of text.split("\n")) {
    const lineStart = offset;
    offset += line.length + 1;
    if (line === "" || CONFLICT_MARKS.has(line)) {
      address = null;
      continue;
    }
    if (/^0x[0-9a-f]+:$/.test(line)) {
      address = parseInt(line.slice(0, -1), 16);
      continue;
    }
    if (/^; 0x[0-9a-f]+$/.test(line)) {
      address = null; // region closed
      continue;
    }
    if (/^db 0x[0-9A-F]{2}$/.test(line)) {
      if (address !== null) {
        address += 1;
      }
      continue;
    }
    const body = stripVerdict(line);
    if (address === null) {
      throw new Error(`instruction line outside any region: ${line}`);
    }
    const row = table.rows[address - table.base];
    if (row === undefined) {
      throw new Error(`address 0x${address.toString(16)} outside the table`);
    }
    const [length, expected] = row;
    if (expected !== body) {
      throw new Error(
        `decode mismatch at 0x${address.toString(16)}: ` +
          `table says ${JSON.stringify(expected)}, snippet says ${JSON.stringify(body)}`,
      );
    }
    out.push({
      start: lineStart,
      end: lineStart + body.length,
      address,
      text: body,
    });
    address += length;
  }
  return out;
}

export function addressForSpan(
  lines: LineAddress[],
  start: number,
  end: number,
): number {
  for (const line of lines) {
    if (line.start <= start && end <= line.end + 1) {
      return line.address;
    }
  }
  throw new Error(`no instruction line covers span [${start}, ${end})`);
}
