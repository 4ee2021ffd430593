"""Regenerate the files under fixtures/ from the tables in this script.

    python scripts/build_fixtures.py [--out fixtures]

Outputs are deterministic, so rerunning leaves a clean tree unchanged.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from slotfill.annotation import build_annotation_prompt
from slotfill.backends import prompt_hash
from slotfill.model import AnnotatedTranscript, Transcript, write_jsonl
from slotfill.registry import SlotRegistry

REGISTRY = [
    {
        "label": "Company Name",
        "constraints": [{"type": "entity_kind", "kind": "organization"}],
        "gazetteer": ["Net Company", "Acme Insurance", "Bright Energy", "Sky Mobile", "Harbor Bank", "Green Clinic",
                      "Luigi's Trattoria"],
    },
    {
        "label": "Customer Name",
        "constraints": [{"type": "entity_kind", "kind": "person"}, {"type": "token_count", "min": 1, "max": 4}],
        "gazetteer": ["John Doe", "Maria Lopez", "Priya Shah", "Tom Becker", "Aiko Tanaka", "Sam Okafor",
                      "Lena Fischer", "Omar Haddad"],
    },
    {"label": "Account Number", "constraints": [{"type": "entity_kind", "kind": "cardinal"}, {"type": "length", "min": 4, "max": 12}]},
    {"label": "Claim Number", "constraints": [{"type": "regex", "pattern": "alphanumeric_id"}]},
    {"label": "Email", "constraints": [{"type": "entity_kind", "kind": "email"}]},
    {"label": "Phone Number", "constraints": [{"type": "entity_kind", "kind": "phone"}]},
    {"label": "Appointment Time", "constraints": [{"type": "entity_kind", "kind": "time"}]},
    {"label": "Appointment Date", "constraints": [{"type": "entity_kind", "kind": "date"}]},
    {"label": "Amount", "constraints": [{"type": "entity_kind", "kind": "money"}]},
    {"label": "Dosage", "constraints": [{"type": "partial_cardinal"}]},
    {"label": "Party Size", "constraints": [{"type": "entity_kind", "kind": "cardinal"}]},
    {"label": "Duration", "constraints": [{"type": "entity_kind", "kind": "duration"}]},
    {
        "label": "Reason For Call",
        "kind": "abstractive",
        "constraints": [{"type": "length", "min": 3, "max": 120}],
        "triggers": ["doesn't work", "not working", "issue", "problem", "cancel", "charged twice", "refund",
                     "reschedule", "book a table", "file a claim", "refill"],
    },
]

# (id, domain, [(speaker, text, frame)])
CORPUS = [
    ("telecom-1", "telecom", [
        ("agent", "Thank you for calling Net Company. How can I assist you today?", {"Company Name": "Net Company"}),
        ("customer", "Yes, uh I'm John Doe, and the account number is 123456. My wifi doesn't work.",
         {"Customer Name": "John Doe", "Account Number": "123456", "Reason For Call": "wifi doesn't work"}),
        ("agent", "I'm sorry to hear that. Let me pull up your account.", {}),
        ("customer", "Sure, take your time.", {}),
        ("agent", "I see an outage in your area, it should be fixed in two hours.", {"Duration": "two hours"}),
    ]),
    ("telecom-2", "telecom", [
        ("agent", "Sky Mobile support, this is Dana speaking.", {"Company Name": "Sky Mobile"}),
        ("customer", "Hi, this is Maria Lopez. I was charged twice on my last bill.",
         {"Customer Name": "Maria Lopez", "Reason For Call": "charged twice on last bill"}),
        ("agent", "Can you confirm the account number for me?", {}),
        ("customer", "It's 77412093.", {"Account Number": "77412093"}),
        ("agent", "Thanks. I see a duplicate charge of $49.99 and will refund it.", {"Amount": "$49.99"}),
        ("customer", "Great, you can send the receipt to maria.lopez@example.com.", {"Email": "maria.lopez@example.com"}),
    ]),
    ("insurance-1", "insurance", [
        ("agent", "Good morning, Acme Insurance claims desk.", {"Company Name": "Acme Insurance"}),
        ("customer", "Hello, I need to file a claim for my car. My name is Tom Becker.",
         {"Customer Name": "Tom Becker", "Reason For Call": "file a claim for car"}),
        ("agent", "I'm sorry about that. Do you have an existing claim number?", {}),
        ("customer", "Yes, the claim number is CL48213.", {"Claim Number": "CL48213"}),
        ("agent", "Got it. What is the best phone number to reach you?", {}),
        ("customer", "You can call me at 555-867-5309.", {"Phone Number": "555-867-5309"}),
    ]),
    ("insurance-2", "insurance", [
        ("agent", "Acme Insurance, how may I help?", {"Company Name": "Acme Insurance"}),
        ("customer", "Hi, Priya Shah here. I have a problem with claim CX90211.",
         {"Customer Name": "Priya Shah", "Claim Number": "CX90211", "Reason For Call": "problem with claim"}),
        ("agent", "Let me check. The adjuster approved five hundred dollars so far.", {"Amount": "five hundred dollars"}),
        ("customer", "That seems low. How long does an appeal take?", {}),
        ("agent", "Usually about three weeks.", {"Duration": "three weeks"}),
    ]),
    ("health-1", "healthcare", [
        ("agent", "Green Clinic pharmacy line, how can I help?", {"Company Name": "Green Clinic"}),
        ("customer", "Hi, I'm Aiko Tanaka and I need a refill of my blood pressure medication.",
         {"Customer Name": "Aiko Tanaka", "Reason For Call": "refill of blood pressure medication"}),
        ("agent", "Sure. What dosage are you taking?", {}),
        ("customer", "I take 500 mg every morning.", {"Dosage": "500 mg"}),
        ("agent", "Your refill will be ready on March fifth.", {"Appointment Date": "March fifth"}),
        ("customer", "Can I pick it up at 4:30 PM?", {"Appointment Time": "4:30 PM"}),
    ]),
    ("health-2", "healthcare", [
        ("agent", "Thank you for calling Green Clinic.", {"Company Name": "Green Clinic"}),
        ("customer", "Hello, this is Sam Okafor. I need to reschedule my appointment.",
         {"Customer Name": "Sam Okafor", "Reason For Call": "reschedule appointment"}),
        ("agent", "No problem. We have an opening on April 12 at 9 AM.",
         {"Appointment Date": "April 12", "Appointment Time": "9 AM"}),
        ("customer", "That works for me.", {}),
        ("agent", "Please bring your card. The visit lasts about forty five minutes.", {"Duration": "forty five minutes"}),
    ]),
    ("restaurant-1", "restaurant", [
        ("agent", "Luigi's Trattoria, how can I help you?", {"Company Name": "Luigi's Trattoria"}),
        ("customer", "Hi, I'd like to book a table for four people tonight.",
         {"Party Size": "four people", "Reason For Call": "book a table"}),
        ("agent", "Certainly, what time would you like?", {}),
        ("customer", "Around seven thirty pm if possible.", {"Appointment Time": "seven thirty pm"}),
        ("agent", "Done. May I have a name for the reservation?", {}),
        ("customer", "Lena Fischer, and my number is 555-201-7788.",
         {"Customer Name": "Lena Fischer", "Phone Number": "555-201-7788"}),
    ]),
    ("banking-1", "banking", [
        ("agent", "Harbor Bank, you're speaking with Lee.", {"Company Name": "Harbor Bank"}),
        ("customer", "Hi, I'm Omar Haddad. My card is not working at the store.",
         {"Customer Name": "Omar Haddad", "Reason For Call": "card not working"}),
        ("agent", "I can help. What is your account number?", {}),
        ("customer", "Account number 40051234.", {"Account Number": "40051234"}),
        ("agent", "I see a hold of $120.00 from yesterday. It will clear in two days.",
         {"Amount": "$120.00", "Duration": "two days"}),
        ("customer", "Okay, please email me at omar.h@example.org when it clears.", {"Email": "omar.h@example.org"}),
    ]),
    ("energy-1", "energy", [
        ("agent", "Bright Energy customer care, how can I help?", {"Company Name": "Bright Energy"}),
        ("customer", "I want to cancel my gas contract. This is John Doe.",
         {"Customer Name": "John Doe", "Reason For Call": "cancel gas contract"}),
        ("agent", "I'm sorry to see you go. Your final bill is eighty two dollars.", {"Amount": "eighty two dollars"}),
        ("customer", "Fine. Can the technician come on June 3 at 10:15 AM?",
         {"Appointment Date": "June 3", "Appointment Time": "10:15 AM"}),
        ("agent", "Yes, that slot is available.", {}),
    ]),
    ("telecom-3", "telecom", [
        ("agent", "Net Company billing, good afternoon.", {"Company Name": "Net Company"}),
        ("customer", "Hi, there is an issue with my bill, my account is 99120045.",
         {"Account Number": "99120045", "Reason For Call": "issue with bill"}),
        ("agent", "I see a late fee of $15. I can remove it.", {"Amount": "$15"}),
        ("customer", "Thank you so much.", {}),
        ("agent", "You're welcome. Anything else I can do?", {}),
        ("customer", "No, that's all. Bye.", {}),
    ]),
    ("restaurant-2", "restaurant", [
        ("agent", "Good evening, Luigi's Trattoria.", {"Company Name": "Luigi's Trattoria"}),
        ("customer", "Hello, I need to cancel my reservation for tomorrow at 8 PM.",
         {"Reason For Call": "cancel reservation", "Appointment Time": "8 PM"}),
        ("agent", "Of course. Under what name?", {}),
        ("customer", "Priya Shah, party of two.", {"Customer Name": "Priya Shah", "Party Size": "two"}),
        ("agent", "All cancelled, have a nice night.", {}),
    ]),
]

# Worked scoring example: one unit, two predictions
SCORING_EXAMPLE_REF = {"time": "7:00 PM", "people": "2 people", "restaurant": "Joe's Pizza & Italian Restaurant"}
SCORING_EXAMPLE_PRED = {
    "prediction_1": {"time": "7 PM", "people": "two", "restaurant": "joes pizza"},
    "prediction_2": {"time": "19:00", "people": "couple", "restaurant": "Joe's Italian Restaurant"},
}


def annotated_corpus() -> list[AnnotatedTranscript]:
    out = []
    for tid, domain, turns in CORPUS:
        transcript = Transcript.from_record(
            {"id": tid, "domain": domain, "turns": [{"speaker": s, "text": t} for s, t, _ in turns]}
        )
        frames = {i: f for i, (_, _, f) in enumerate(turns) if f}
        out.append(AnnotatedTranscript(transcript, frames))
    return out


def teacher_responses(corpus: list[AnnotatedTranscript], registry: SlotRegistry) -> dict[str, str]:
    """Canned teacher outputs keyed by the hash of the annotation prompt."""
    out = {}
    for doc in corpus:
        prompt = build_annotation_prompt(doc.transcript, registry.labels()).prompt
        body = {t.text: (doc.frame(t.index).to_dict() or "NA") for t in doc.transcript.turns}
        out[prompt_hash(prompt)] = json.dumps(body, ensure_ascii=False)
    return out


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "fixtures")
    args = parser.parse_args(argv)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)

    (out / "registry.json").write_text(json.dumps(REGISTRY, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    registry = SlotRegistry.from_config(REGISTRY)
    corpus = annotated_corpus()
    write_jsonl(out / "annotated.jsonl", (d.to_record() for d in corpus))
    write_jsonl(out / "transcripts.jsonl", (d.transcript.to_record() for d in corpus))
    (out / "teacher_replay.json").write_text(
        json.dumps(teacher_responses(corpus, registry), indent=2, ensure_ascii=False, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    write_jsonl(out / "scoring_example_ref.jsonl", [{"unit_id": "e1", "frame": SCORING_EXAMPLE_REF}])
    for name, frame in SCORING_EXAMPLE_PRED.items():
        write_jsonl(out / f"scoring_example_{name}.jsonl", [{"unit_id": "e1", "frame": frame}])
    n_turns = sum(len(d.transcript.turns) for d in corpus)
    print(f"wrote {len(corpus)} transcripts ({n_turns} turns) and {len(REGISTRY)} labels to {out}")


if __name__ == "__main__":
    main()
