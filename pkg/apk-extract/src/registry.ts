/**
 * Sensitive-API registry: one dotted signature per line, '#' comments and
 * blank lines ignored. Matches the primary toolkit's registry format.
 */

export class RegistryError extends Error {}

export function parseRegistry(text: string): string[] {
  const entries: string[] = [];
  const seen = new Map<string, number>();
  const lines = text.split(/\r?\n/);
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line || line.startsWith("#")) {
      continue;
    }
    const first = seen.get(line);
    if (first !== undefined) {
      throw new RegistryError(
        `duplicate signature at line ${i + 1} (first seen at line ${first}): ${line}`,
      );
    }
    seen.set(line, i + 1);
    entries.push(line);
  }
  if (entries.length === 0) {
    throw new RegistryError("registry contains no signatures");
  }
  return entries;
}
