"""Regenerates the synthetic mini corpora under data/mini.

The texts are assembled from small phrase tables with a fixed seed, so the
output is stable and carries no third-party content.
"""

import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "data" / "mini"

PLACES = [
    ("der Hafen", "the harbour"), ("die Bibliothek", "the library"), ("der Bahnhof", "the station"),
    ("das Rathaus", "the town hall"), ("die Schule", "the school"), ("der Markt", "the market"),
    ("das Museum", "the museum"), ("die Klinik", "the clinic"), ("der Park", "the park"),
    ("die Fabrik", "the factory"),
]
EVENTS = [
    ("wurde am Montag nach langer Renovierung wieder eröffnet",
     "reopened on Monday after a long renovation"),
    ("bleibt wegen eines Wasserschadens bis zum Frühjahr geschlossen",
     "will stay closed until spring because of water damage"),
    ("erhielt von der Stadt zusätzliche Mittel für neue Geräte",
     "received additional funds from the city for new equipment"),
    ("verlängert ab nächster Woche seine Öffnungszeiten am Abend",
     "is extending its evening opening hours from next week"),
    ("plant im Sommer ein Fest für alle Familien der Umgebung",
     "is planning a festival in the summer for all families in the area"),
]
DETAILS = [
    ("Viele Anwohner hatten seit Monaten auf diese Nachricht gewartet.",
     "Many residents had been waiting months for this news."),
    ("Die Verwaltung rechnet mit deutlich mehr Besuchern als im Vorjahr.",
     "The administration expects considerably more visitors than last year."),
    ("Kritiker bemängeln jedoch, dass die Kosten zu hoch gewesen seien.",
     "Critics, however, complain that the costs were too high."),
    ("Ein Sprecher sagte, man habe aus früheren Fehlern gelernt.",
     "A spokesperson said that lessons had been learned from earlier mistakes."),
    ("Die Arbeiten wurden von einem örtlichen Unternehmen ausgeführt.",
     "The work was carried out by a local company."),
    ("Weitere Informationen sollen in den kommenden Tagen folgen.",
     "Further information is expected in the coming days."),
    ("Die Bürgermeisterin nannte das Ergebnis einen großen Erfolg für die Stadt.",
     "The mayor called the result a great success for the town."),
    ("Auch die Verkehrsanbindung soll im Laufe des Jahres verbessert werden.",
     "The transport links are also to be improved over the course of the year."),
]

TOPICS = [
    ("lighthouse", "The old lighthouse on the northern cliff was built in 1872 to guide fishing boats "
     "past a dangerous reef. Its lamp was first fuelled by whale oil, later by paraffin, and it was "
     "electrified in 1931. The tower has been automated since 1989 and no keeper lives there today.",
     "When was the lighthouse electrified?",
     "The lighthouse was electrified in 1931. Before that its lamp had burned whale oil and later "
     "paraffin, and the tower has run automatically since 1989."),
    ("orchard", "The village orchard holds about two hundred apple trees of eleven varieties. Most were "
     "planted by a cooperative in the 1950s. Each autumn volunteers press the fallen fruit into juice, "
     "which is sold at the harvest fair to pay for new saplings.",
     "What happens to the fallen fruit each autumn?",
     "Each autumn volunteers press the fallen apples into juice, and the juice is sold at the harvest "
     "fair so that the orchard can pay for new saplings."),
    ("bridge", "The stone bridge over the river has five arches and is about ninety metres long. A flood "
     "in 1907 destroyed the central arch, which was rebuilt with concrete faced in local sandstone. "
     "Heavy lorries have been banned from the bridge since 1975.",
     "Which part of the bridge did the flood destroy?",
     "The flood of 1907 destroyed the central arch of the bridge. It was rebuilt in concrete faced with "
     "local sandstone so that it still matches the other four arches."),
    ("choir", "The town choir was founded by a schoolteacher in 1923 with twelve members. It now has "
     "more than sixty singers and rehearses every Thursday in the parish hall. The choir gives two "
     "concerts a year, one in spring and one shortly before the winter holidays.",
     "How often does the choir give concerts?",
     "The choir gives two concerts a year. One takes place in spring and the other shortly before the "
     "winter holidays, and rehearsals are held every Thursday in the parish hall."),
    ("canal", "The canal linking the two rivers opened in 1811 and carried mostly coal and grain. Rail "
     "competition ended commercial traffic by 1930. A restoration trust reopened the first eight miles "
     "for leisure boats in 2004 and is now repairing the remaining locks.",
     "Why did commercial traffic on the canal end?",
     "Commercial traffic ended by 1930 because the railways took over the transport of coal and grain. "
     "The canal has since been partly reopened for leisure boats by a restoration trust."),
]

STORY_START = [
    "Mara had saved for months to buy a second-hand bicycle.",
    "Tom forgot his umbrella on the morning of the big interview.",
    "The bakery on the corner announced that it would close for good.",
    "Lena found an old map folded inside a library book.",
    "Sam promised his sister he would fix the broken kite.",
]
STORY_MIDDLE = [
    "She checked every advertisement in the local paper.",
    "Dark clouds gathered as he walked to the bus stop.",
    "Regular customers came by to say goodbye to the owner.",
    "It showed a path through the woods behind her school.",
    "He spent the whole evening gluing the torn paper.",
]
STORY_END = [
    ("At last she found one that was both cheap and sturdy.", "She decided to sell her car instead."),
    ("He arrived soaked but still got the job.", "He bought a new pair of skis."),
    ("The owner thanked them all with free bread.", "The shop began selling motorbikes."),
    ("That weekend she followed it and found a hidden pond.", "She never learned to read."),
    ("The next day the kite flew higher than ever.", "He threw the kite into the oven."),
]


def write(name, records):
    with open(OUT / name, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n")


def translation(rng):
    out = []
    for i in range(20):
        place_de, place_en = PLACES[i % len(PLACES)]
        ev_de, ev_en = EVENTS[rng.randrange(len(EVENTS))]
        picks = rng.sample(range(len(DETAILS)), 4)
        src = [f"{place_de[0].upper()}{place_de[1:]} {ev_de}."] + [DETAILS[k][0] for k in picks]
        ref = [f"{place_en[0].upper()}{place_en[1:]} {ev_en}."] + [DETAILS[k][1] for k in picks]
        out.append({"id": f"tr-{i:03d}", "task": "translation", "context": " ".join(src),
                    "reference": " ".join(ref)})
    return out


def question_answering(rng):
    out = []
    for i in range(20):
        _, para, question, answer = TOPICS[i % len(TOPICS)]
        extra = DETAILS[rng.randrange(len(DETAILS))][1]
        out.append({"id": f"qa-{i:03d}", "task": "question_answering",
                    "context": f"{question}\n{para} {extra}", "reference": answer})
    return out


def summarization(rng):
    out = []
    for i in range(20):
        _, para, _, answer = TOPICS[i % len(TOPICS)]
        extra = [DETAILS[k][1] for k in rng.sample(range(len(DETAILS)), 3)]
        out.append({"id": f"sum-{i:03d}", "task": "summarization",
                    "context": para + " " + " ".join(extra),
                    "reference": answer + " " + extra[0]})
    return out


def story_completion(rng):
    out = []
    for i in range(20):
        k = i % len(STORY_START)
        right, wrong = STORY_END[k]
        extra = DETAILS[rng.randrange(len(DETAILS))][1]
        out.append({"id": f"st-{i:03d}", "task": "story_completion",
                    "context": f"{STORY_START[k]} {STORY_MIDDLE[k]}",
                    "reference": f"{right} {extra}", "wrong_ending": wrong})
    return out


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    rng = random.Random(20240601)
    write("translation_de_en.jsonl", translation(rng))
    write("question_answering.jsonl", question_answering(rng))
    write("summarization.jsonl", summarization(rng))
    write("story_completion.jsonl", story_completion(rng))
    votes = {"task": "summarization", "votes": {
        "char_delete_minor": {"coherence": 1, "consistency": 0, "fluency": 8, "relevance": 1},
        "word_fictional_minor": {"coherence": 1, "consistency": 8, "fluency": 0, "relevance": 1},
        "sent_reorder_minor": {"coherence": 7, "consistency": 1, "fluency": 1, "relevance": 1},
    }}
    (OUT / "summarization.votes.json").write_text(json.dumps(votes, indent=2) + "\n")


if __name__ == "__main__":
    main()
