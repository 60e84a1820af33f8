"""Question templates and deterministic expansion with database values.

Three template families cover the evaluation: routes serving a
municipality, municipalities served by a route, and the trip count for a
route/stop pair.  Expansion binds real values from the database, optionally
appends rider conditions (hour range, date range, weekday set, direction)
and occasionally injects an invalid route/stop pair to probe how the
chatbot reacts to impossible questions.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from transit_agent.errors import InsufficientData
from transit_agent.guard import QueryCandidate, enforce_read_only
from transit_agent.ingest.database import DatabaseHandle
from transit_agent.providers import CompletionRequest, Provider

RIDER_ORDER = ("hour_range", "date_range", "weekday_set", "direction")

WEEKDAY_COLUMNS = {
    "Monday": "monday",
    "Tuesday": "tuesday",
    "Wednesday": "wednesday",
    "Thursday": "thursday",
    "Friday": "friday",
    "Saturday": "saturday",
    "Sunday": "sunday",
}


@dataclass
class QuestionTemplate:
    id: str
    text_pattern: str
    answer_kind: str  # entity_list | scalar


TEMPLATES: dict[str, QuestionTemplate] = {
    "T1": QuestionTemplate(
        "T1", "Which routes serve the municipality of {municipality}", "entity_list"
    ),
    "T2": QuestionTemplate("T2", "Which municipalities are served by route {route}", "entity_list"),
    "T3": QuestionTemplate(
        "T3",
        "What is the average number of trips that belong to route {route} and use the stop {stop}",
        "scalar",
    ),
}


@dataclass
class GeneratedQuestion:
    id: str
    template_id: str
    text: str
    bindings: dict
    riders: list[str] = field(default_factory=list)
    injected_invalid: bool = False
    paraphrase_seed: int = 0

    @property
    def answer_kind(self) -> str:
        return TEMPLATES[self.template_id].answer_kind

    def to_dict(self) -> dict:
        return {
            "question_id": self.id,
            "template_id": self.template_id,
            "text": self.text,
            "bindings": self.bindings,
            "riders": list(self.riders),
            "injected_invalid": self.injected_invalid,
            "paraphrase_seed": self.paraphrase_seed,
            "answer_kind": self.answer_kind,
        }


@dataclass
class GoldEntry:
    question_id: str
    gold_sql: str
    expected_kind: str

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "gold_sql": self.gold_sql,
            "expected_kind": self.expected_kind,
        }


@dataclass
class ExpansionConfig:
    counts: dict = field(default_factory=lambda: {"T1": 4, "T2": 4, "T3": 4})
    rider_probability: float = 0.4
    max_riders: int = 2
    invalid_probability: float = 0.3
    paraphrase: str = "off"  # off | provider
    seed: int = 0


def _sq(value: str) -> str:
    return value.replace("'", "''")


def _hour_clause(bindings: dict) -> str:
    return (
        f"st.departure >= {bindings['hour_start'] * 3600} "
        f"and st.departure < {bindings['hour_end'] * 3600}"
    )


def _date_clause(bindings: dict) -> str:
    return (
        f"c.start_date <= '{_sq(bindings['date_end'])}' "
        f"and c.end_date >= '{_sq(bindings['date_start'])}'"
    )


def _weekday_clause(bindings: dict) -> str:
    flags = " or ".join(f"c.{WEEKDAY_COLUMNS[day]} = 1" for day in bindings["weekdays"])
    return f"({flags})"


def _direction_clause(bindings: dict) -> str:
    return f"t.direction = '{bindings['direction']}'"


def _rider_text(rider: str, bindings: dict) -> str:
    if rider == "hour_range":
        return f" between {bindings['hour_start']}:00 and {bindings['hour_end']}:00"
    if rider == "date_range":
        return f" from {bindings['date_start']} to {bindings['date_end']}"
    if rider == "weekday_set":
        days = " and ".join(f"{day}s" for day in bindings["weekdays"])
        return f" on {days}"
    if rider == "direction":
        label = "outbound" if bindings["direction"] == "andata" else "inbound"
        return f" in the {label} direction"
    raise ValueError(f"unknown rider {rider!r}")


def build_gold_sql(template_id: str, bindings: dict, riders: list[str]) -> str:
    """Hand-written gold query pattern for a template, bound and extended
    with rider conditions."""
    conditions: list[str] = []
    needs_calendar = "date_range" in riders or "weekday_set" in riders
    if "hour_range" in riders:
        conditions.append(_hour_clause(bindings))
    if "date_range" in riders:
        conditions.append(_date_clause(bindings))
    if "weekday_set" in riders:
        conditions.append(_weekday_clause(bindings))
    if "direction" in riders:
        conditions.append(_direction_clause(bindings))
    calendar_join = (
        "join calendar c on c.agency_id = t.agency_id and c.service_id = t.service_id "
        if needs_calendar
        else ""
    )
    extra = "".join(f"and {clause} " for clause in conditions)

    if template_id == "T1":
        return (
            "select distinct r.agency_id, r.route_id "
            "from routes r "
            "join trips t on t.agency_id = r.agency_id and t.route_id = r.route_id "
            "join stop_times st on st.agency_id = t.agency_id and st.trip_id = t.trip_id "
            "join stops s on s.agency_id = st.agency_id and s.stop_id = st.stop_id "
            "join municipalities m on m.code = s.municipality_code "
            + calendar_join
            + f"where m.name = '{_sq(bindings['municipality'])}' "
            + extra
        ).strip()
    if template_id == "T2":
        return (
            "select distinct m.name "
            "from municipalities m "
            "join stops s on s.municipality_code = m.code "
            "join stop_times st on st.agency_id = s.agency_id and st.stop_id = s.stop_id "
            "join trips t on t.agency_id = st.agency_id and t.trip_id = st.trip_id "
            "join routes r on r.agency_id = t.agency_id and r.route_id = t.route_id "
            + calendar_join
            + f"where r.short_name = '{_sq(bindings['route'])}' "
            + extra
        ).strip()
    if template_id == "T3":
        return (
            "select count(distinct t.trip_id) "
            "from trips t "
            "join routes r on r.agency_id = t.agency_id and r.route_id = t.route_id "
            "join stop_times st on st.agency_id = t.agency_id and st.trip_id = t.trip_id "
            "join stops s on s.agency_id = st.agency_id and s.stop_id = st.stop_id "
            + calendar_join
            + f"where r.short_name = '{_sq(bindings['route'])}' and s.name = '{_sq(bindings['stop'])}' "
            + extra
        ).strip()
    raise ValueError(f"unknown template {template_id!r}")


# -- value pools --------------------------------------------------------------


def _pool(db: DatabaseHandle, sql: str) -> list:
    return db.execute_query(sql)[1]


def _municipality_pool(db: DatabaseHandle) -> list[str]:
    return [
        row[0]
        for row in _pool(
            db,
            "select distinct m.name from municipalities m "
            "join stops s on s.municipality_code = m.code order by m.name",
        )
    ]


def _route_pool(db: DatabaseHandle) -> list[str]:
    return [
        row[0]
        for row in _pool(db, "select distinct short_name from routes where short_name != '' order by short_name")
    ]


def _linked_pairs(db: DatabaseHandle) -> list[tuple[str, str]]:
    return [
        (row[0], row[1])
        for row in _pool(
            db,
            "select distinct r.short_name, s.name from routes r "
            "join trips t on t.agency_id = r.agency_id and t.route_id = r.route_id "
            "join stop_times st on st.agency_id = t.agency_id and st.trip_id = t.trip_id "
            "join stops s on s.agency_id = st.agency_id and s.stop_id = st.stop_id "
            "where r.short_name != '' order by 1, 2",
        )
    ]


def _unlinked_pairs(db: DatabaseHandle) -> list[tuple[str, str]]:
    """Route/stop name pairs never connected by any trip."""
    return [
        (row[0], row[1])
        for row in _pool(
            db,
            "select distinct r.short_name, s.name from routes r cross join stops s "
            "where r.short_name != '' and not exists ("
            "  select 1 from trips t "
            "  join routes r2 on r2.agency_id = t.agency_id and r2.route_id = t.route_id "
            "  join stop_times st on st.agency_id = t.agency_id and st.trip_id = t.trip_id "
            "  join stops s2 on s2.agency_id = st.agency_id and s2.stop_id = st.stop_id "
            "  where r2.short_name = r.short_name and s2.name = s.name"
            ") order by 1, 2",
        )
    ]


def _date_pool(db: DatabaseHandle) -> list[tuple[str, str]]:
    return [
        (row[0], row[1])
        for row in _pool(db, "select distinct start_date, end_date from calendar order by 1, 2")
    ]


# -- expansion --------------------------------------------------------------


def expand_templates(
    db: DatabaseHandle, config: ExpansionConfig, provider: Provider | None = None
) -> tuple[list[GeneratedQuestion], list[GoldEntry]]:
    """Generate bound questions plus their gold queries.

    Deterministic for a fixed seed when paraphrasing is off.  Injected
    invalid questions (template 3 only) pair a real route with a stop none
    of its trips uses.
    """
    rng = random.Random(config.seed)
    municipalities = _municipality_pool(db)
    routes = _route_pool(db)
    linked = _linked_pairs(db)
    unlinked = _unlinked_pairs(db)
    dates = _date_pool(db)

    questions: list[GeneratedQuestion] = []
    gold: list[GoldEntry] = []

    for template_id in ("T1", "T2", "T3"):
        count = int(config.counts.get(template_id, 0))
        template = TEMPLATES[template_id]
        for index in range(count):
            bindings: dict = {}
            injected_invalid = False
            if template_id == "T1":
                if not municipalities:
                    raise InsufficientData("no municipalities with stops to bind")
                bindings["municipality"] = rng.choice(municipalities)
            elif template_id == "T2":
                if not routes:
                    raise InsufficientData("no named routes to bind")
                bindings["route"] = rng.choice(routes)
            else:
                injected_invalid = rng.random() < config.invalid_probability
                pool = unlinked if injected_invalid else linked
                if not pool:
                    if injected_invalid:
                        injected_invalid = False
                        pool = linked
                    if not pool:
                        raise InsufficientData("no route/stop pairs to bind")
                route, stop = rng.choice(pool)
                bindings["route"] = route
                bindings["stop"] = stop

            riders = _draw_riders(rng, config, dates, bindings)
            text = template.text_pattern.format(**bindings)
            for rider in riders:
                text += _rider_text(rider, bindings)
            text += "?"
            paraphrase_seed = rng.randrange(1_000_000)
            if config.paraphrase == "provider" and provider is not None:
                text = _paraphrase(provider, text, paraphrase_seed)

            question = GeneratedQuestion(
                id=f"{template_id}-{index + 1:03d}",
                template_id=template_id,
                text=text,
                bindings=bindings,
                riders=riders,
                injected_invalid=injected_invalid,
                paraphrase_seed=paraphrase_seed,
            )
            questions.append(question)
            gold_sql = build_gold_sql(template_id, bindings, riders)
            _check_gold(db, gold_sql)
            gold.append(GoldEntry(question.id, gold_sql, template.answer_kind))

    return questions, gold


def _draw_riders(
    rng: random.Random, config: ExpansionConfig, dates: list[tuple[str, str]], bindings: dict
) -> list[str]:
    riders: list[str] = []
    for rider in RIDER_ORDER:
        if len(riders) >= config.max_riders:
            break
        if rng.random() >= config.rider_probability:
            continue
        if rider == "hour_range":
            start = rng.choice((7, 8, 16))
            bindings["hour_start"], bindings["hour_end"] = start, start + 2
        elif rider == "date_range":
            if not dates:
                continue
            bindings["date_start"], bindings["date_end"] = rng.choice(dates)
        elif rider == "weekday_set":
            bindings["weekdays"] = rng.sample(list(WEEKDAY_COLUMNS), rng.choice((1, 2)))
        elif rider == "direction":
            bindings["direction"] = rng.choice(("andata", "ritorno"))
        riders.append(rider)
    return riders


def _paraphrase(provider: Provider, text: str, seed: int) -> str:
    reply = provider.complete(
        CompletionRequest(
            system_prompt="",
            messages=[
                (
                    "user",
                    f"Paraphrase the following question, keeping every name and number "
                    f"unchanged (variant {seed}): {text}",
                )
            ],
        )
    )
    return reply.strip() or text


def _check_gold(db: DatabaseHandle, gold_sql: str):
    report = enforce_read_only(QueryCandidate(gold_sql, origin="gold"))
    if report.verdict == "rejected":
        raise ValueError(f"gold query failed the guard: {report.diagnostics[0].message}")
    db.execute_query(gold_sql)  # must execute cleanly
