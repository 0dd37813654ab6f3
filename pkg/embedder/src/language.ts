/** Title-based language annotation. */

import { franc } from "franc";

// ISO 639-3 -> 639-1 for the languages we classify against. Detection is
// restricted to this set: on short social-media titles the unrestricted
// detector drifts into close relatives (sco for English, nds for German)
const TO_639_1: Record<string, string> = {
  arb: "ar", ben: "bn", cmn: "zh", deu: "de", eng: "en", fra: "fr",
  hin: "hi", ind: "id", ita: "it", jpn: "ja", kor: "ko", nld: "nl",
  pes: "fa", pol: "pl", por: "pt", rus: "ru", spa: "es", swe: "sv",
  tha: "th", tur: "tr", ukr: "uk", urd: "ur", vie: "vi",
};

const CANDIDATES = Object.keys(TO_639_1);

const MIN_SAMPLE = 10;

/**
 * Detect the language of a title. Empty titles are "und"; short titles are
 * repeated up to the detector's minimum sample length before classifying.
 */
export function detectLanguage(title: string): string {
  const trimmed = title.trim();
  if (!trimmed) return "und";
  const sample =
    trimmed.length >= MIN_SAMPLE
      ? trimmed
      : (trimmed + " ").repeat(Math.ceil(MIN_SAMPLE / (trimmed.length + 1))).trim();
  const code = franc(sample, {
    minLength: Math.min(sample.length, MIN_SAMPLE),
    only: CANDIDATES,
  });
  return TO_639_1[code] ?? "und";
}

/** id -> language code for every record, in input order. */
export function annotateLanguages(records: { id: string; title: string }[]): Record<string, string> {
  const out: Record<string, string> = {};
  for (const record of records) out[record.id] = detectLanguage(record.title);
  return out;
}
