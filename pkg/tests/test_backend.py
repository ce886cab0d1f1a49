from __future__ import annotations

import json

import httpx
import pytest
from hypothesis import given, strategies as st

from uitasker.actions import DIRECTIONS, Action, ActionType, format_action
from uitasker.backend import (
    ActionNotAllowed,
    HttpBackend,
    RateLimited,
    ScriptedBackend,
    ScriptEntry,
    ScriptExhausted,
    ScriptMismatch,
    Timeout,
    TransportError,
    UnknownElement,
    UnparseableResponse,
    parse_action_response,
    parse_description_response,
    parse_rank_response,
    parse_substitution_response,
    parse_target_response,
    reply,
    split_response,
)
from uitasker.backend.base import BackendError
from uitasker.prompting import PromptBuilder, TaskContext
from uitasker.ui.snapshot import Bounds, ScreenSnapshot, UiCapability, UiElement

CLICK = frozenset({UiCapability.CLICKABLE})


def screen() -> ScreenSnapshot:
    kids = (
        UiElement(1, "label", Bounds(0, 0, 500, 100), text="Home"),
        UiElement(2, "icon", Bounds(900, 0, 100, 100), resource_name="ic_search", allowed_actions=CLICK),
        UiElement(3, "text-field", Bounds(0, 200, 800, 100), text="Search",
                  allowed_actions=frozenset({UiCapability.CLICKABLE, UiCapability.TEXT_EDITABLE})),
        UiElement(4, "button", Bounds(800, 1780, 200, 120), text="Library", allowed_actions=CLICK),
        UiElement(5, "button", Bounds(0, 1780, 200, 120), text="Disabled"),
    )
    return ScreenSnapshot(UiElement(0, "container", Bounds(0, 0, 1080, 1920), children=kids), (1080, 1920))


def prompt(kind="action"):
    b = PromptBuilder()
    if kind == "action":
        return b.action_prompt(TaskContext("x"), screen())
    if kind == "rank":
        return b.rank_prompt("x", [])
    return b.description_prompt(screen())


def resp(text: str):
    return split_response(text)


class TestSplit:
    def test_thought_and_result(self):
        r = resp("THOUGHT: tap it\nbecause reasons\nRESULT: PRESS")
        assert r.chain_of_thought == "tap it\nbecause reasons"
        assert r.result_block == "PRESS"

    def test_no_grammar(self):
        r = resp("PRESS")
        assert r.chain_of_thought is None and r.result_block == "PRESS"

    def test_last_result_wins(self):
        assert resp("RESULT: BACK\nTHOUGHT: no wait\nRESULT: DONE").result_block == "DONE"


class TestParseAction:
    def test_enter_text_single_quotes(self):
        assert parse_action_response(resp("RESULT: ENTER_TEXT 'chest fly'")) == Action.enter_text("chest fly")

    def test_back(self):
        assert parse_action_response(resp("RESULT: BACK")) == Action.back()

    def test_prose_rejected(self):
        with pytest.raises(UnparseableResponse):
            parse_action_response(resp("I think you should maybe tap something"))

    @pytest.mark.parametrize(
        "text,expected",
        [
            ("RESULT: press", Action.press()),
            ("RESULT: TAP", Action.press()),
            ('RESULT: ENTER "sushi"', Action.enter_text("sushi")),
            ("RESULT: SCROLL down", Action.scroll("down")),
            ("RESULT: swipe LEFT", Action.swipe("left")),
            ('RESULT: OPEN "Spotify"', Action.open("Spotify")),
            ("RESULT: DONE", Action.done()),
        ],
    )
    def test_vocabulary(self, text, expected):
        assert parse_action_response(resp(text)) == expected

    @pytest.mark.parametrize("text", ["RESULT: SCROLL sideways", "RESULT: ENTER_TEXT", "RESULT: DONE? maybe", "RESULT: "])
    def test_malformed(self, text):
        with pytest.raises(UnparseableResponse):
            parse_action_response(resp(text))

    @given(
        st.sampled_from(list(ActionType)),
        st.text(min_size=1, max_size=30).filter(lambda s: s.strip() == s and s.splitlines() == [s]),
        st.sampled_from(DIRECTIONS),
    )
    def test_format_round_trip(self, kind, payload, direction):
        if kind in (ActionType.ENTER_TEXT, ActionType.OPEN):
            action = Action(kind, payload)
        elif kind in (ActionType.SCROLL, ActionType.SWIPE):
            action = Action(kind, direction)
        else:
            action = Action(kind)
        assert parse_action_response(resp(reply(format_action(action)))) == action

    @given(st.text(max_size=200))
    def test_never_panics(self, text):
        for parse in (parse_action_response, parse_rank_response, parse_substitution_response, parse_description_response):
            try:
                parse(resp(text))
            except UnparseableResponse:
                pass
        try:
            parse_target_response(resp(text), screen(), Action.press())
        except (UnparseableResponse, UnknownElement, ActionNotAllowed):
            pass


class TestParseTarget:
    def test_by_id(self):
        sel = parse_target_response(resp('THOUGHT: history lives in Library\nRESULT: [4] "Library" (800,1780,200,120)'), screen(), Action.press())
        assert (sel.element_id, sel.label, sel.bounds) == (4, "Library", Bounds(800, 1780, 200, 120))
        assert sel.rationale == "history lives in Library"

    def test_unknown_id(self):
        with pytest.raises(UnknownElement):
            parse_target_response(resp("RESULT: [99]"), screen(), Action.press())

    def test_not_allowed(self):
        with pytest.raises(ActionNotAllowed):
            parse_target_response(resp('RESULT: [5] "Disabled"'), screen(), Action.press())

    def test_label_only(self):
        assert parse_target_response(resp('RESULT: "library"'), screen(), Action.press()).element_id == 4

    def test_label_overrides_stale_id(self):
        assert parse_target_response(resp('RESULT: [2] "Library"'), screen(), Action.press()).element_id == 4

    def test_bounds_only(self):
        assert parse_target_response(resp("RESULT: (900,0,100,100)"), screen(), Action.press()).element_id == 2

    def test_enter_text_needs_editable(self):
        with pytest.raises(ActionNotAllowed):
            parse_target_response(resp("RESULT: [4]"), screen(), Action.enter_text("x"))
        assert parse_target_response(resp("RESULT: [3]"), screen(), Action.enter_text("x")).element_id == 3


class TestOtherParsers:
    @pytest.mark.parametrize("text,expected", [("RESULT: 4", 4), ("RESULT: [12]", 12), ("RESULT: NONE", None), ("RESULT: id=3.", 3)])
    def test_rank(self, text, expected):
        assert parse_rank_response(resp(text)) == expected

    def test_rank_garbage(self):
        with pytest.raises(UnparseableResponse):
            parse_rank_response(resp("RESULT: the home screen"))

    def test_description(self):
        assert parse_description_response(resp("RESULT: Home  screen\nwith tabs\n\nclickable: x")) == "Home screen with tabs"

    def test_substitution_unchanged(self):
        assert parse_substitution_response(resp("RESULT: UNCHANGED")).status == "unchanged"

    def test_substitution_refused(self):
        assert parse_substitution_response(resp("RESULT: NONE")).status == "refused"

    def test_substitution_rewrite(self):
        r = parse_substitution_response(resp('RESULT: 1. PRESS\n2. ENTER_TEXT "spaghetti"\n3. PRESS'))
        assert r.status == "rewritten"
        assert r.actions == (Action.press(), Action.enter_text("spaghetti"), Action.press())

    def test_substitution_mapping(self):
        r = parse_substitution_response(resp('RESULT: "sushi" -> "spaghetti"\nTokyo => Paris'))
        assert r.status == "mapping"
        assert r.mapping == (("sushi", "spaghetti"), ("Tokyo", "Paris"))


class TestScriptedBackend:
    def test_echo(self):
        b = ScriptedBackend([ScriptEntry("action", reply("PRESS"))])
        assert b.complete(prompt()).result_block == "PRESS"

    def test_deterministic_replay(self):
        b = ScriptedBackend([("action", reply("PRESS")), ("action", reply("BACK"))])
        first = [b.complete(prompt()).raw for _ in range(2)]
        b.reset()
        second = [b.complete(prompt()).raw for _ in range(2)]
        assert first == second

    def test_mismatch(self):
        b = ScriptedBackend([("rank", reply("1"))])
        with pytest.raises(ScriptMismatch):
            b.complete(prompt("action"))

    def test_exhausted(self):
        with pytest.raises(ScriptExhausted):
            ScriptedBackend([]).complete(prompt())

    def test_by_kind_and_defaults(self):
        b = ScriptedBackend([("rank", reply("3"))], mode="by-kind", defaults={"rank": reply("NONE")})
        assert b.complete(prompt("rank")).result_block == "3"
        assert b.complete(prompt("rank")).result_block == "NONE"
        with pytest.raises(ScriptExhausted):
            b.complete(prompt("action"))
        assert [c.kind for c in b.calls] == ["rank", "rank"]

    def test_from_document(self):
        b = ScriptedBackend.from_document(
            {"entries": [{"kind": "action", "result": "PRESS", "thought": "go"}], "defaults": {"rank": "NONE"}}
        )
        assert b.complete(prompt()).chain_of_thought == "go"
        assert b.complete(prompt("rank")).result_block == "NONE"

    def test_bad_kind(self):
        with pytest.raises(ValueError):
            ScriptEntry("chat", "x")


def _backend(handler, **kw):
    sleeps = []
    b = HttpBackend("http://lm.test/v1/chat", "k", transport=httpx.MockTransport(handler), sleep=sleeps.append, **kw)
    return b, sleeps


class TestHttpBackend:
    def test_success(self):
        seen = {}

        def handler(request):
            seen["auth"] = request.headers["authorization"]
            seen["body"] = json.loads(request.content)
            return httpx.Response(200, json={"choices": [{"message": {"content": "THOUGHT: t\nRESULT: PRESS"}}]})

        b, _ = _backend(handler)
        assert b.complete(prompt()).result_block == "PRESS"
        assert seen["auth"] == "Bearer k"
        assert seen["body"]["temperature"] == 0

    def test_unreachable(self):
        def handler(request):
            raise httpx.ConnectError("refused")

        b, sleeps = _backend(handler)
        with pytest.raises(TransportError):
            b.complete(prompt())
        assert sleeps == []

    def test_rate_limit_retries_with_capped_backoff(self):
        calls = []

        def handler(request):
            calls.append(1)
            return httpx.Response(429)

        b, sleeps = _backend(handler, max_retries=4, backoff=1.0, max_backoff=3.0)
        with pytest.raises(RateLimited):
            b.complete(prompt())
        assert len(calls) == 5
        assert sleeps == [1.0, 2.0, 3.0, 3.0]

    def test_timeout_then_success(self):
        state = {"n": 0}

        def handler(request):
            state["n"] += 1
            if state["n"] == 1:
                raise httpx.ReadTimeout("slow")
            return httpx.Response(200, json={"choices": [{"message": {"content": "RESULT: DONE"}}]})

        b, sleeps = _backend(handler)
        assert b.complete(prompt()).result_block == "DONE"
        assert len(sleeps) == 1

    def test_bad_body(self):
        b, _ = _backend(lambda r: httpx.Response(200, json={"nope": 1}))
        with pytest.raises(TransportError):
            b.complete(prompt())

    def test_client_error_not_retried(self):
        calls = []

        def handler(request):
            calls.append(1)
            return httpx.Response(401, text="bad key")

        b, _ = _backend(handler)
        with pytest.raises(TransportError):
            b.complete(prompt())
        assert len(calls) == 1

    def test_from_env(self, monkeypatch):
        monkeypatch.delenv("UITASKER_LM_ENDPOINT", raising=False)
        with pytest.raises(BackendError):
            HttpBackend.from_env()
        monkeypatch.setenv("UITASKER_LM_ENDPOINT", "http://x")
        monkeypatch.setenv("UITASKER_LM_MODEL", "m")
        assert HttpBackend.from_env().model == "m"

    def test_timeout_is_retryable_type(self):
        assert Timeout.retryable and RateLimited.retryable and not TransportError.retryable
