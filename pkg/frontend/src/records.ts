/**
 * Field-named text records, the wire format of the /v1 API.
 *
 * Records are blocks of `key: value` lines separated by `---` lines.
 * Repeated keys within one record aggregate into an array, preserving
 * order.  This mirrors the service-side codec exactly; both ends must
 * agree byte for byte on encoded output.
 */

export type FieldValue = string | string[];
export type RecordData = { [key: string]: FieldValue };

export const RECORD_SEPARATOR = '---';

const KEY_RE = /^[A-Za-z_][A-Za-z0-9_]*$/;

export class ParseError extends Error {
  readonly lineNo: number;

  constructor(message: string, lineNo: number) {
    super(`line ${lineNo}: ${message}`);
    this.name = 'ParseError';
    this.lineNo = lineNo;
  }
}

/**
 * Parse record text into a list of field objects.
 *
 * Blank lines are ignored.  A line that is neither blank, a separator,
 * nor `key: value` shaped raises ParseError with its line number.
 * Sections with no fields (e.g. a trailing separator) are dropped.
 */
export function decode(text: string): RecordData[] {
  const records: RecordData[] = [];
  let current: RecordData = {};
  const lines = text.split(/\r\n|\n|\r/);
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i];
    const lineNo = i + 1;
    if (line.trim() === RECORD_SEPARATOR) {
      if (Object.keys(current).length > 0) {
        records.push(current);
        current = {};
      }
      continue;
    }
    if (line.trim() === '') {
      continue;
    }
    const sep = line.indexOf(':');
    if (sep < 0) {
      throw new ParseError(`expected 'key: value', got ${JSON.stringify(line)}`, lineNo);
    }
    const key = line.slice(0, sep).trim();
    if (!KEY_RE.test(key)) {
      throw new ParseError(`bad field name ${JSON.stringify(key)}`, lineNo);
    }
    const value = line.slice(sep + 1).trim();
    const existing = current[key];
    if (existing === undefined) {
      current[key] = value;
    } else if (Array.isArray(existing)) {
      existing.push(value);
    } else {
      current[key] = [existing, value];
    }
  }
  if (Object.keys(current).length > 0) {
    records.push(current);
  }
  return records;
}

/**
 * Serialize records to text, one `key: value` line per field.
 *
 * Records are joined with `---` lines and the output ends with a
 * newline.  Values containing newlines and malformed keys are rejected
 * rather than silently corrupting the stream.
 */
export function encode(records: RecordData[]): string {
  const blocks: string[] = [];
  for (const record of records) {
    const lines: string[] = [];
    for (const [key, value] of Object.entries(record)) {
      if (!KEY_RE.test(key)) {
        throw new Error(`bad field name ${JSON.stringify(key)}`);
      }
      const values = Array.isArray(value) ? value : [value];
      for (const item of values) {
        if (item.includes('\n') || item.includes('\r')) {
          throw new Error(`field ${JSON.stringify(key)} value contains a newline`);
        }
        lines.push(`${key}: ${item}`);
      }
    }
    blocks.push(lines.join('\n'));
  }
  return blocks.join(`\n${RECORD_SEPARATOR}\n`) + '\n';
}

/**
 * Read a field that must be present exactly once.
 */
export function one(record: RecordData, key: string): string {
  const value = record[key];
  if (value === undefined) {
    throw new Error(`missing field ${JSON.stringify(key)}`);
  }
  if (Array.isArray(value)) {
    throw new Error(`field ${JSON.stringify(key)} given more than once`);
  }
  return value;
}

/**
 * Read a repeatable field as an array: absent gives [], a single
 * occurrence gives a one-element array.
 */
export function many(record: RecordData, key: string): string[] {
  const value = record[key];
  if (value === undefined) {
    return [];
  }
  return Array.isArray(value) ? value : [value];
}
