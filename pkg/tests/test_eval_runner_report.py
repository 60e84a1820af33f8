import pytest

from transit_agent.errors import EndpointUnreachable
from transit_agent.evaluation.report import render_text, summarize
from transit_agent.evaluation.runner import run_suite
from transit_agent.evaluation.templates import ExpansionConfig, expand_templates
from transit_agent.runstore import RunStore


@pytest.fixture
def questions(transit_db):
    generated, _ = expand_templates(transit_db, ExpansionConfig(seed=11))
    return [q.to_dict() for q in generated]


class TestRunSuite:
    def test_three_questions_two_repeats(self, questions, api_endpoint, tmp_path):
        store = RunStore(tmp_path / "rs.sqlite")
        records = run_suite(questions[:3], api_endpoint, repeats=2, runstore=store)
        assert len(records) == 6
        assert len(store.list_runs()) == 6
        attempts = {(r.question_id, r.attempt) for r in records}
        assert len(attempts) == 6

    def test_failures_recorded_never_dropped(self, api_endpoint, tmp_path):
        store = RunStore(tmp_path / "rs.sqlite")
        bad_question = [{"question_id": "X-1", "text": "Which municipalities are served by route 27?"}]
        records = run_suite(bad_question, api_endpoint, runstore=store)
        assert len(records) == 1
        assert records[0].error is not None
        assert store.list_runs()[0]["error"] is not None

    def test_unreachable_endpoint_flags_partial(self, questions, tmp_path):
        store = RunStore(tmp_path / "rs.sqlite")
        with pytest.raises(EndpointUnreachable):
            run_suite(questions[:2], "http://127.0.0.1:9", runstore=store, timeout_s=0.5)
        assert store.get_meta("suite_partial") == "true"
        assert store.list_runs() == []  # zero complete records

    def test_repeats_must_be_positive(self, questions, api_endpoint):
        with pytest.raises(ValueError):
            run_suite(questions, api_endpoint, repeats=0)

    def test_parallel_run_matches_sequential(self, questions, api_endpoint, tmp_path):
        sequential = run_suite(questions[:4], api_endpoint, repeats=1)
        parallel = run_suite(questions[:4], api_endpoint, repeats=1, parallelism=3)
        assert [r.comparable_json() for r in sequential] == [
            r.comparable_json() for r in parallel
        ]

    def test_42_questions_with_uneven_repeats_yield_146_records(
        self, transit_db, api_endpoint, tmp_path
    ):
        # the published suite size: 42 questions asked 146 times in total;
        # the per-question distribution is configuration (here 20x4 + 22x3)
        generated, _ = expand_templates(
            transit_db, ExpansionConfig(seed=3, counts={"T1": 14, "T2": 14, "T3": 14})
        )
        suite = [q.to_dict() for q in generated]
        assert len(suite) == 42
        for question in suite[:20]:
            question["repeats"] = 4
        records = run_suite(suite, api_endpoint, repeats=3, parallelism=4)
        assert len(records) == 20 * 4 + 22 * 3 == 146

    def test_slow_endpoint_recorded_as_failure(self, tmp_path):
        import threading
        import time as time_module
        from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

        class SlowHandler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                time_module.sleep(1.0)
                self.send_response(200)
                self.send_header("Content-Length", "2")
                self.end_headers()
                self.wfile.write(b"{}")

        server = ThreadingHTTPServer(("127.0.0.1", 0), SlowHandler)
        threading.Thread(target=server.serve_forever, daemon=True).start()
        try:
            records = run_suite(
                [{"question_id": "Q", "text": "slow?"}],
                "http://{}:{}".format(*server.server_address),
                timeout_s=0.2,
            )
        finally:
            server.shutdown()
        assert len(records) == 1
        assert records[0].error == "request timed out"


class TestSummarize:
    def test_reported_entity_family_accuracy(self):
        # the published aggregate for the entity-list family: counts over
        # 112 runs with 59 exact matches
        outcomes = (
            [{"template_id": "T1", "category": "syntax_error"}] * 10
            + [{"template_id": "T1", "category": "wrong_shape"}] * 17
            + [{"template_id": "T1", "category": "exact_match"}] * 30
            + [{"template_id": "T2", "category": "exact_match"}] * 29
            + [{"template_id": "T2", "category": "superset"}] * 2
            + [{"template_id": "T2", "category": "subset"}] * 10
            + [{"template_id": "T2", "category": "disjoint"}] * 14
        )
        summary = summarize(outcomes)
        assert summary.total == 112
        assert summary.accuracy["entity_list"] == pytest.approx(59 / 112, abs=1e-3)
        assert summary.accuracy["entity_list"] == pytest.approx(0.527, abs=1e-3)

    def test_reported_scalar_family_accuracy(self):
        outcomes = [{"template_id": "T3", "category": "scalar_exact"}] * 6 + [
            {"template_id": "T3", "category": "zero_result"}
        ] * 28
        summary = summarize(outcomes)
        assert summary.accuracy["scalar"] == pytest.approx(6 / 34, abs=1e-3)
        assert summary.accuracy["scalar"] == pytest.approx(0.176, abs=1e-3)

    def test_empty_outcomes(self):
        summary = summarize([])
        assert summary.total == 0
        assert summary.per_template == {}
        assert summary.accuracy == {}

    def test_counts_partition_runs(self):
        outcomes = (
            [{"template_id": "T1", "category": "exact_match"}] * 3
            + [{"template_id": "T2", "category": "disjoint"}] * 2
            + [{"template_id": "T3", "category": "scalar_diff"}] * 4
        )
        summary = summarize(outcomes)
        assert sum(sum(c.values()) for c in summary.per_template.values()) == len(outcomes)
        assert sum(summary.overall.values()) == len(outcomes)

    def test_json_schema_shape(self):
        summary = summarize([{"template_id": "T1", "category": "exact_match"}])
        payload = summary.to_json_dict()
        assert payload["T1"] == {"exact_match": 1}
        assert "accuracy" in payload
        assert payload["accuracy"]["T1"] == 1.0

    def test_unknown_category_rejected(self):
        with pytest.raises(ValueError):
            summarize([{"template_id": "T1", "category": "mystery"}])

    def test_render_text_mentions_each_template(self):
        outcomes = [
            {"template_id": "T1", "category": "exact_match"},
            {"template_id": "T3", "category": "zero_result"},
        ]
        text = render_text(summarize(outcomes))
        assert "T1" in text and "T3" in text and "accuracy" in text
