import re
import sqlite3

from transit_agent.catalog import (
    BASELINE_RULES,
    build_prompt_document,
    describe_database,
    render_prompt,
)
from transit_agent.ingest.database import DatabaseHandle


def make_two_table_db(tmp_path):
    path = tmp_path / "two.sqlite"
    conn = sqlite3.connect(path)
    conn.executescript(
        """
        CREATE TABLE agency (agency_id TEXT PRIMARY KEY, agency_name TEXT);
        CREATE TABLE routes (
            agency_id TEXT REFERENCES agency(agency_id),
            route_id TEXT,
            PRIMARY KEY (agency_id, route_id)
        );
        """
    )
    conn.close()
    return DatabaseHandle(path)


def annotations_file(tmp_path, text):
    path = tmp_path / "annotations.txt"
    path.write_text(text, encoding="utf-8")
    return path


class TestDescribeDatabase:
    def test_two_tables_two_descriptors(self, tmp_path):
        db = make_two_table_db(tmp_path)
        annotations = annotations_file(
            tmp_path,
            "agency: agencies\n"
            "agency.agency_id: id\n"
            "agency.agency_name: name\n"
            "routes: routes\n"
            "routes.agency_id: agency\n"
            "routes.route_id: id\n",
        )
        catalog = describe_database(db, annotations)
        assert [t.name for t in catalog.tables] == ["agency", "routes"]
        assert catalog.warnings == []

    def test_unknown_annotation_key_warned(self, tmp_path):
        db = make_two_table_db(tmp_path)
        annotations = annotations_file(
            tmp_path,
            "agency: agencies\nagency.agency_id: id\nagency.agency_name: name\n"
            "routes: routes\nroutes.agency_id: agency\nroutes.route_id: id\n"
            "routes.color: no such column\n",
        )
        catalog = describe_database(db, annotations)
        assert any("routes.color" in w for w in catalog.warnings)

    def test_missing_comment_warned_and_placeholder_used(self, tmp_path):
        db = make_two_table_db(tmp_path)
        annotations = annotations_file(tmp_path, "agency: agencies\n")
        catalog = describe_database(db, annotations)
        assert any("routes.route_id has no comment" in w for w in catalog.warnings)
        agency = catalog.tables[0]
        assert all(comment for _, comment in agency.column_comments)

    def test_every_column_has_exactly_one_comment(self, catalog):
        for table in catalog.tables:
            names = [column for column, _ in table.column_comments]
            assert len(names) == len(set(names))
            assert len(names) > 0

    def test_ddl_columns_match_introspection(self, transit_db, catalog):
        # oracle: reparse the stored DDL and compare with PRAGMA table_info
        for table in catalog.tables:
            if table.ddl.upper().startswith("CREATE VIEW"):
                continue
            body = table.ddl[table.ddl.index("(") + 1 :].rsplit(")", 1)[0]
            declared = []
            depth = 0
            for line in body.split(","):
                token = line.strip().split()[0] if line.strip() else ""
                if depth == 0 and token and token.upper() not in (
                    "PRIMARY",
                    "FOREIGN",
                    "UNIQUE",
                    "CHECK",
                    "CONSTRAINT",
                ):
                    declared.append(token.strip('"'))
                depth += line.count("(") - line.count(")")
            introspected = [column for column, _ in transit_db.table_columns(table.name)]
            assert declared == introspected

    def test_foreign_keys_reference_known_tables(self, catalog):
        names = set(catalog.table_names())
        assert catalog.foreign_keys
        for fk in catalog.foreign_keys:
            assert fk.child_table in names
            assert fk.parent_table in names
            assert len(fk.child_columns) == len(fk.parent_columns)

    def test_fixture_db_exposes_view_in_catalog(self, catalog):
        assert "route_geometry" in catalog.table_names()


class TestRenderPrompt:
    def test_minimal_document_structure(self, tmp_path):
        db = make_two_table_db(tmp_path)
        annotations = annotations_file(tmp_path, "")
        catalog = describe_database(db, annotations)
        doc = build_prompt_document(catalog, rules=["Rule one.", "Rule two.", "Rule three."])
        text = render_prompt(doc)
        assert text.count("<table>") == text.count("</table>") == 2
        assert text.count("<rule>") == 3

    def test_baseline_rules_verbatim(self, catalog):
        text = render_prompt(build_prompt_document(catalog))
        assert "<rule>Query only relevant columns.</rule>" in text
        assert "<rule>If a query returns nothing, report the empty result.</rule>" in text
        assert "<rule>Always double check your query.</rule>" in text
        assert BASELINE_RULES[0] == "Query only relevant columns."

    def test_rendering_is_deterministic(self, catalog):
        doc = build_prompt_document(catalog, exemplars=[("q", "select 1")])
        assert render_prompt(doc) == render_prompt(doc)

    def test_section_order_and_exemplars_last(self, catalog):
        text = render_prompt(build_prompt_document(catalog, exemplars=[("Q1", "select 1")]))
        order = [
            text.index("<task>"),
            text.index("<database>"),
            text.index("<foreign_keys>"),
            text.index("<rules>"),
            text.index("<examples>"),
        ]
        assert order == sorted(order)
        assert text.index("</rules>") < text.index("<examples>")

    def test_every_table_appears_exactly_once(self, catalog):
        text = render_prompt(build_prompt_document(catalog))
        for table in catalog.tables:
            assert text.count(f"<name>{table.name}</name>") == 1

    def test_tags_well_formed(self, catalog):
        text = render_prompt(build_prompt_document(catalog, exemplars=[("q", "select 1")]))
        stack = []
        for match in re.finditer(r"<(/?)([a-z_]+)>", text):
            closing, tag = match.groups()
            if tag in ("name", "description", "definition", "question", "sql", "task", "rule"):
                continue  # inline tags verified by pairing below
            if closing:
                assert stack and stack[-1] == tag, f"mismatched </{tag}>"
                stack.pop()
            else:
                stack.append(tag)
        assert stack == []
        for tag in ("task", "name", "description", "definition", "question", "sql", "rule"):
            assert text.count(f"<{tag}>") == text.count(f"</{tag}>")

    def test_comment_lines_mirror_comment_on_syntax(self, catalog):
        text = render_prompt(build_prompt_document(catalog))
        assert "COMMENT ON column agency.agency_id IS 'unique identifier of the agency';" in text

    def test_char_limit_drops_lowest_similarity_exemplars_first(self, catalog):
        exemplars = [("best", "select 1"), ("middle", "select 2"), ("worst", "select 3")]
        doc = build_prompt_document(catalog, exemplars=exemplars)
        full = render_prompt(doc)
        trimmed = render_prompt(doc, char_limit=len(full) - 1)
        assert "worst" not in trimmed
        assert "best" in trimmed

    def test_foreign_key_constraint_lines(self, catalog):
        text = render_prompt(build_prompt_document(catalog))
        assert re.search(
            r"ALTER TABLE routes ADD CONSTRAINT \w+ FOREIGN KEY \(agency_id\) "
            r"REFERENCES agency\(agency_id\);",
            text,
        )
