"""Author the test fixture set: four menus, detections, truth, profiles.

Everything here is hand-written data; the script only does geometry
bookkeeping (token x/y placement) and file writing. Expected parses,
prices in minor units, and reading-order text are stated literally in
the tables below so golden files never depend on the code under test.

Run from the repo root: python3 scripts/gen_fixtures.py
"""
from __future__ import annotations

import argparse
import json
from pathlib import Path

DIMS = {"width": 1408, "height": 1408}
X_COLUMNS = (100, 760)      # x_min for column 0 / column 1
Y_START = 120
Y_STEP = 64                 # vertical distance between line tops
Y_STAGGER = 32              # column 1 offset so lines never share a band
LINE_H = 40
CHAR_W = 18
TOKEN_GAP = 14

# Each menu: sections -> items (name, raw price, minor units, currency,
# optional description rendered as its own price-less line). The "column"
# key places a section in the right-hand column of a two-column page.
MENUS = {
    "menu_en": {
        "language": "en",
        "language_hint": None,
        "keyframe": 17,
        "decoy_frame": 8,
        "sections": [
            {
                "title": "STARTERS",
                "column": 0,
                "items": [
                    ("Greek Salad", "8.50", 850, "UNKNOWN", None),
                    ("Garlic Bread", "4.00", 400, "UNKNOWN", None),
                    ("Tomato Soup", "5.00", 500, "UNKNOWN", None),
                ],
            },
            {
                "title": "MAINS",
                "column": 0,
                "items": [
                    ("Grilled Octopus", "14.00", 1400, "UNKNOWN", None),
                    ("Peanut Chicken Curry", "11.00", 1100, "UNKNOWN", None),
                    ("Margherita Pizza", "9.00", 900, "UNKNOWN", None),
                    ("Beef Burger", "12.50", 1250, "UNKNOWN", None),
                ],
            },
            {
                "title": "DESSERTS",
                "column": 0,
                "items": [
                    ("Chocolate Cake", "6.00", 600, "UNKNOWN", None),
                    ("Lemon Sorbet", "4.50", 450, "UNKNOWN", None),
                ],
            },
        ],
        "detections": [
            (2, "person", 0.99, [600, 600, 800, 800]),
            (3, "menu", 0.45, [604, 604, 804, 804]),
            (8, "menu", 0.91, [200, 300, 500, 600]),
            (11, "menu", 0.97, [654, 254, 954, 554]),
            (17, "menu", 0.82, [554, 554, 854, 854]),
            (17, "cup", 0.99, [0, 0, 100, 100]),
            (20, "menu", 0.90, [100, 100, 400, 400]),
        ],
    },
    "menu_it": {
        "language": "it",
        "language_hint": None,
        "keyframe": 12,
        "decoy_frame": 4,
        "sections": [
            {
                "title": "ANTIPASTI",
                "column": 0,
                "items": [
                    ("Bruschetta al Pomodoro", "€6.50", 650, "EUR", None),
                    ("Caprese di Bufala", "€9.00", 900, "EUR", None),
                    ("Carpaccio di Manzo", "€12.00", 1200, "EUR", None),
                ],
            },
            {
                "title": "PIZZE",
                "column": 0,
                "items": [
                    ("Pizza Margherita", "€8.00", 800, "EUR", "con pomodoro fresco e basilico"),
                    ("Pizza Quattro Formaggi", "€11.50", 1150, "EUR", None),
                ],
            },
            {
                "title": "DOLCI",
                "column": 1,
                "items": [
                    ("Tiramisù della Casa", "€6.00", 600, "EUR", None),
                    ("Panna Cotta ai Frutti", "€5.50", 550, "EUR", None),
                    ("Gelato Artigianale Misto", "€5.00", 500, "EUR", None),
                ],
            },
        ],
        "detections": [
            (1, "person", 0.95, [500, 500, 700, 900]),
            (4, "menu", 0.95, [804, 604, 1004, 804]),
            (12, "menu", 0.80, [540, 560, 868, 848]),
            (19, "menu", 0.88, [404, 404, 604, 604]),
        ],
    },
    "menu_pl": {
        "language": "pl",
        "language_hint": None,
        "keyframe": 21,
        "decoy_frame": 7,
        "sections": [
            {
                "title": "ZUPY",
                "column": 0,
                "items": [
                    ("Żurek Staropolski", "12,00 zł", 1200, "PLN", None),
                    ("Pomidorowa z Makaronem", "10,00 zł", 1000, "PLN", None),
                ],
            },
            {
                "title": "DANIA GŁÓWNE",
                "column": 0,
                "items": [
                    ("Pierogi Ruskie", "18,50 zł", 1850, "PLN", None),
                    ("Kotlet Schabowy", "24,00 zł", 2400, "PLN", None),
                    ("Placki Ziemniaczane", "19,00 zł", 1900, "PLN", None),
                ],
            },
            {
                "title": "DESERY",
                "column": 0,
                "items": [
                    ("Szarlotka z Lodami", "14,00 zł", 1400, "PLN", None),
                    ("Sernik Domowy", "12,50 zł", 1250, "PLN", None),
                ],
            },
        ],
        "detections": [
            (5, "cup", 0.99, [650, 650, 750, 750]),
            (7, "menu", 0.93, [704, 804, 904, 1004]),
            (14, "menu", 0.99, [904, 104, 1104, 304]),
            (21, "menu", 0.77, [604, 604, 804, 804]),
        ],
    },
    "menu_el": {
        "language": "el",
        "language_hint": "el",
        "keyframe": 9,
        "decoy_frame": 15,
        "sections": [
            {
                "title": "ΟΡΕΚΤΙΚΑ",
                "column": 0,
                "items": [
                    ("Χωριάτικη Σαλάτα", "7.50€", 750, "EUR", None),
                    ("Τζατζίκι με Ψωμί", "4.00€", 400, "EUR", None),
                    ("Γαρίδες Σαγανάκι", "12.00€", 1200, "EUR", None),
                ],
            },
            {
                "title": "ΚΥΡΙΩΣ ΠΙΑΤΑ",
                "column": 0,
                "items": [
                    ("Μουσακάς Παραδοσιακός", "11.00€", 1100, "EUR", None),
                    ("Σουβλάκι Κοτόπουλο", "9.50€", 950, "EUR", None),
                ],
            },
            {
                "title": "ΓΛΥΚΑ",
                "column": 0,
                "items": [
                    ("Γιαούρτι με Μέλι", "5.00€", 500, "EUR", None),
                    ("Μπακλαβάς Σπιτικός", "6.00€", 600, "EUR", None),
                ],
            },
        ],
        "detections": [
            (3, "menu", 0.30, [604, 604, 804, 804]),
            (9, "menu", 0.88, [504, 504, 904, 904]),
            (15, "menu", 0.92, [304, 504, 704, 904]),
            (22, "person", 0.90, [600, 600, 820, 820]),
        ],
    },
}

PROFILES = {
    "alex": {
        "manual.json": [
            {
                "id": "note-allergy",
                "text": "Severe peanut allergy, always check sauces and desserts.",
                "tags": ["allergen:peanut"],
            },
            {
                "id": "note-likes",
                "text": "Loves grilled seafood, especially octopus, squid and sea bass.",
                "tags": ["likes:seafood", "likes:octopus", "likes:grilled"],
            },
            {
                "id": "note-dislikes",
                "text": "Not a fan of heavy pork dishes or very sweet desserts.",
                "tags": ["dislikes:pork"],
            },
        ],
        "transactions.csv": (
            "date,merchant,amount,currency,category\n"
            "2026-05-14,Taverna Poseidon,42.10,EUR,seafood restaurant\n"
            "2026-05-21,Ostria Beach Bar,18.30,EUR,grilled octopus meze\n"
            "2026-06-02,Pizzeria Napoli,23.80,EUR,pizza dinner\n"
            "2026-06-17,Cafe Brot,9.20,EUR,bakery breakfast\n"
        ),
        "places.json": [
            {"name": "Taverna Poseidon", "note": "favourite seafood place by the harbour"},
            {"name": "Gelateria Luna", "note": "best lemon sorbet in town"},
        ],
        "photos.json": [
            {"caption": "grilled octopus plate on holiday", "labels": ["octopus", "seafood", "dinner"]},
            {"caption": "chocolate cake birthday", "labels": ["dessert", "cake"]},
        ],
    },
    "seafood_allergy": {
        "manual.json": [
            {
                "id": "sea-allergy",
                "text": "Allergic to shrimp and fish.",
                "tags": ["allergen:shrimp", "allergen:fish"],
            }
        ],
    },
}


def token_confidence(line_idx: int, tok_idx: int) -> float:
    return round(0.86 + ((7 * line_idx + 3 * tok_idx) % 13) / 100.0, 2)


def quad(x: float, y: float, w: float, h: float) -> list[list[float]]:
    return [[x, y], [x + w, y], [x + w, y + h], [x, y + h]]


def lay_out_line(words: list[str], x_start: float, y: float, line_idx: int) -> list[dict]:
    tokens = []
    x = x_start
    for tok_idx, word in enumerate(words):
        width = CHAR_W * len(word)
        tokens.append(
            {
                "text": word,
                "quad": quad(x, y, width, LINE_H),
                "confidence": token_confidence(line_idx, tok_idx),
            }
        )
        x += width + TOKEN_GAP
    return tokens


def menu_lines(menu: dict) -> list[tuple[int, str]]:
    """(column, text) for every rendered line, in column-major order."""
    lines: list[tuple[int, str]] = []
    for column in (0, 1):
        for section in menu["sections"]:
            if section["column"] != column:
                continue
            lines.append((column, section["title"]))
            for name, raw, _minor, _cur, desc in section["items"]:
                lines.append((column, f"{name} {raw}"))
                if desc:
                    lines.append((column, desc))
    return lines


def build_ocr_doc(menu_id: str, menu: dict) -> dict:
    tokens: list[dict] = []
    next_y = {0: Y_START, 1: Y_START + Y_STAGGER}
    for line_idx, (column, text) in enumerate(menu_lines(menu)):
        y = next_y[column]
        next_y[column] += Y_STEP
        tokens.extend(lay_out_line(text.split(" "), X_COLUMNS[column], y, line_idx))
    tokens.reverse()  # fixed scramble so parsing cannot rely on input order
    return {"image_ref": f"{menu_id}.jpg", "dims": dict(DIMS), "tokens": tokens}


def build_decoy_doc(menu_id: str, frame: int) -> dict:
    tokens = []
    for line_idx, word in enumerate(["SPECIALS", "chalk", "board"]):
        tokens.extend(
            [
                {
                    "text": word,
                    "quad": quad(X_COLUMNS[0], Y_START + line_idx * Y_STEP, CHAR_W * len(word), LINE_H),
                    "confidence": 0.15,
                }
            ]
        )
    return {"image_ref": f"{menu_id}_frame{frame}.jpg", "dims": dict(DIMS), "tokens": tokens}


def build_detections(menu: dict) -> dict:
    return {
        "detections": [
            {"frame_index": f, "label": label, "confidence": conf, "bbox": bbox}
            for f, label, conf, bbox in menu["detections"]
        ],
        "dims": dict(DIMS),
    }


def build_truth(menu_id: str, menu: dict) -> dict:
    items = [name for s in menu["sections"] for name, *_ in s["items"]]
    return {"menu_id": menu_id, "language": menu["language"], "items": items}


def build_parsed_golden(menu: dict) -> dict:
    return {
        "language_hint": menu["language_hint"],
        "sections": [
            {
                "title": s["title"],
                "items": [
                    {
                        "name": name,
                        "description": desc,
                        "price": {"amount_minor": minor, "currency": cur, "raw": raw},
                    }
                    for name, raw, minor, cur, desc in s["items"]
                ],
            }
            for s in menu["sections"]
        ],
    }


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="tests/fixtures", type=Path)
    args = parser.parse_args()
    out: Path = args.out

    for menu_id, menu in MENUS.items():
        ocr_doc = build_ocr_doc(menu_id, menu)
        write_json(out / "ocr" / f"{menu_id}.ocr.json", ocr_doc)

        scenario = out / "scenarios" / menu_id
        write_json(scenario / "detections.json", build_detections(menu))
        write_json(scenario / "ocr" / f"frame_{menu['keyframe']}.ocr.json", ocr_doc)
        write_json(
            scenario / "ocr" / f"frame_{menu['decoy_frame']}.ocr.json",
            build_decoy_doc(menu_id, menu["decoy_frame"]),
        )

        write_json(out / "truth" / f"{menu_id}.json", build_truth(menu_id, menu))
        write_json(out / "golden" / f"{menu_id}.parsed.json", build_parsed_golden(menu))
        reading = "\n".join(text for _, text in menu_lines(menu))
        (out / "golden").mkdir(parents=True, exist_ok=True)
        (out / "golden" / f"{menu_id}.reading.txt").write_text(reading + "\n", encoding="utf-8")

    for profile, files in PROFILES.items():
        for filename, content in files.items():
            path = out / "profiles" / profile / filename
            path.parent.mkdir(parents=True, exist_ok=True)
            if isinstance(content, str):
                path.write_text(content, encoding="utf-8")
            else:
                write_json(path, content)

    print(f"fixtures written under {out}")


if __name__ == "__main__":
    main()
