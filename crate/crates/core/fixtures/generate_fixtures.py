#!/usr/bin/env python3
"""Regenerates the bundled synthetic corpora.

The output is fully determined by the seeds below. Run from this directory:

    python3 generate_fixtures.py
"""

import json
import random
from collections import Counter

LEXICON = {
    "en": {
        "hope": ["hope", "future", "better", "dream", "together", "achieve",
                 "believe", "brighter", "tomorrow", "courage", "faith", "heal",
                 "succeed", "rise", "wish"],
        "plain": ["the", "a", "is", "was", "of", "and", "to", "in", "on", "with",
                  "for", "today", "train", "market", "rain", "food", "office",
                  "book", "water", "city", "night", "news", "weather", "work",
                  "closed", "late", "expensive", "broken", "street", "house",
                  "price", "meeting", "report", "week", "money", "bus", "shop",
                  "phone", "room", "window"],
        # cue words for the multiclass fixture
        "generalized": ["everything", "someday", "somehow", "good", "things"],
        "realistic": ["plan", "exam", "study", "practice", "recover"],
        "unrealistic": ["miracle", "magic", "forever", "impossible", "lottery"],
    },
    "ur": {
        "hope": ["امید", "مستقبل", "بہتر", "خواب", "روشن", "کامیابی", "یقین",
                 "خوشی", "حوصلہ", "دعا", "منزل", "سویرا", "بہار", "ہمت", "ترقی"],
        "plain": ["ہم", "یہ", "ہے", "میں", "نے", "کا", "کی", "کے", "اور", "آج",
                  "بارش", "کھانا", "گھر", "بازار", "سڑک", "دفتر", "کتاب", "پانی",
                  "گاڑی", "شہر", "دن", "رات", "خبر", "موسم", "کام", "بند", "دیر",
                  "مہنگا", "ٹوٹ", "گیا", "تھا", "نہیں", "پر", "سے", "کو", "بہت",
                  "زیادہ", "فون", "کمرہ", "کھڑکی"],
    },
    "es": {
        "hope": ["esperanza", "futuro", "mejor", "sueño", "juntos", "lograr",
                 "confío", "creo", "saldremos", "adelante", "luz", "ánimo",
                 "mañana", "vamos", "fe"],
        "plain": ["el", "la", "los", "de", "que", "y", "en", "un", "una", "por",
                  "con", "para", "es", "está", "hoy", "tren", "mercado", "lluvia",
                  "comida", "oficina", "libro", "agua", "ciudad", "noche",
                  "noticias", "tiempo", "trabajo", "cerrado", "tarde", "caro",
                  "roto", "llegó", "calle", "casa", "precio", "reunión",
                  "informe", "semana", "dinero", "ventana"],
    },
    "de": {
        "hope": ["hoffnung", "zukunft", "besser", "traum", "gemeinsam",
                 "schaffen", "glaube", "zuversichtlich", "morgen", "licht", "mut",
                 "erreichen", "wünsche", "gelingen", "aufbruch"],
        "plain": ["der", "die", "das", "und", "ist", "nicht", "ein", "eine", "mit",
                  "auf", "für", "heute", "zug", "markt", "regen", "essen", "büro",
                  "buch", "wasser", "stadt", "nacht", "nachrichten", "wetter",
                  "arbeit", "geschlossen", "spät", "teuer", "kaputt", "straße",
                  "haus", "preis", "sitzung", "bericht", "woche", "geld", "fenster",
                  "zimmer", "telefon", "laden", "bus"],
    },
}


def sentence(rng, lang, cues, n_cues):
    plain = LEXICON[lang]["plain"]
    words = [rng.choice(plain) for _ in range(rng.randint(6, 12))]
    for _ in range(n_cues):
        words.insert(rng.randrange(len(words) + 1), rng.choice(cues))
    text = " ".join(words)
    # Latin-script sentences get an initial capital; this exercises
    # normalization without changing content. The full stop is a separate
    # token so that no word gets a punctuated variant.
    if lang != "ur":
        text = text[0].upper() + text[1:] + " ."
    else:
        text += " ۔"
    return text


def binary_rows(rng, lang, n, hope_fraction, prefix):
    n_hope = round(n * hope_fraction)
    labels = ["Hope"] * n_hope + ["NotHope"] * (n - n_hope)
    rng.shuffle(labels)
    rows = []
    for i, label in enumerate(labels):
        if label == "Hope":
            text = sentence(rng, lang, LEXICON[lang]["hope"], rng.randint(2, 3))
        else:
            text = sentence(rng, lang, [], 0)
        rows.append({"id": f"{prefix}-{lang}-{i:03d}", "text": text,
                     "language": lang, "label": label})
    return rows


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False) + "\n")


def counts(rows):
    by_lang = Counter(r["language"] for r in rows)
    by_label = Counter(r["label"] for r in rows)
    by_pair = Counter(f'{r["language"]}/{r["label"]}' for r in rows)
    return {"rows": len(rows), "languages": dict(sorted(by_lang.items())),
            "labels": dict(sorted(by_label.items())),
            "language_label": dict(sorted(by_pair.items()))}


def main():
    manifest = {}

    rng = random.Random(20250101)
    rows = []
    for lang in ["en", "ur", "es", "de"]:
        rows += binary_rows(rng, lang, 100, 0.4, "m")
    write_jsonl("multilingual.jsonl", rows)
    manifest["multilingual.jsonl"] = counts(rows)

    rng = random.Random(20250202)
    rows = []
    for lang in ["en", "ur"]:
        rows += binary_rows(rng, lang, 200, 0.4, "b")
    write_jsonl("hope_bilingual.jsonl", rows)
    manifest["hope_bilingual.jsonl"] = counts(rows)

    rng = random.Random(20250303)
    rows = []
    plan = [("NotHope", None, 80), ("GeneralizedHope", "generalized", 50),
            ("RealisticHope", "realistic", 40), ("UnrealisticHope", "unrealistic", 30)]
    i = 0
    for label, cue, n in plan:
        for _ in range(n):
            cues = LEXICON["en"][cue] if cue else []
            text = sentence(rng, "en", cues, 2 if cue else 0)
            rows.append({"id": f"c-en-{i:03d}", "text": text, "language": "en",
                         "label": label})
            i += 1
    rng.shuffle(rows)
    write_jsonl("hope_multiclass.jsonl", rows)
    manifest["hope_multiclass.jsonl"] = counts(rows)

    with open("manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, ensure_ascii=False, indent=2, sort_keys=True)
        f.write("\n")


if __name__ == "__main__":
    main()
