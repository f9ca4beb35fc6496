"""HTTP facade over scenarios for interactive what-if exploration.

Sessions live in an in-memory LRU store; nothing persists. Every mutating
call bumps the session revision, and a solution is only ever served against
the revision it was computed for, so clients can never pair a stale post
table with fresh constraints.
"""

from __future__ import annotations

import threading
import uuid
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor, TimeoutError as FutureTimeout
from dataclasses import dataclass, field

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse

from . import fixtures as fixture_mod
from .errors import FeobnError, InfeasibleConstraints
from .inference import ConditionalTable, feo_deviation, feo_table
from .learning import Dataset
from .network import FeoScenario, RoleAssignment, assign_roles, build_network
from .sampler import SampleRequest, sample
from .solver import (
    Solution,
    add_feasibility_constraints,
    apply_solution,
    build_feo_system,
    enumerate_free_parameters,
    solve as solve_system,
)

DEFAULT_CAPACITY = 64
DEFAULT_SOLVE_TIMEOUT = 30.0
MAX_SAMPLE_COUNT = 10 ** 6


def _problem(status: int, title: str, detail: str = "", **extra) -> JSONResponse:
    body = {"type": "about:blank", "title": title, "status": status, "detail": detail}
    body.update(extra)
    return JSONResponse(body, status_code=status, media_type="application/problem+json")


def _table_json(table: ConditionalTable) -> list[dict]:
    return [
        {
            "justified": dict(row.justified),
            "sensitive": None if row.sensitive is None else dict(row.sensitive),
            "state": row.target_state,
            "p": row.probability,
        }
        for row in table.rows
    ]


@dataclass
class Session:
    id: str
    scenario: FeoScenario
    constraints: list = field(default_factory=list)
    revision: int = 0
    solution: Solution | None = None
    solution_revision: int | None = None
    corrected: object = None  # Network once solved
    lock: threading.Lock = field(default_factory=threading.Lock)

    def invalidate(self):
        self.solution = None
        self.solution_revision = None
        self.corrected = None


class SessionStore:
    """LRU-evicting map of session id -> Session."""

    def __init__(self, capacity: int = DEFAULT_CAPACITY):
        self.capacity = capacity
        self._sessions: OrderedDict[str, Session] = OrderedDict()
        self._lock = threading.Lock()

    def put(self, session: Session) -> None:
        with self._lock:
            self._sessions[session.id] = session
            self._sessions.move_to_end(session.id)
            while len(self._sessions) > self.capacity:
                self._sessions.popitem(last=False)

    def get(self, session_id: str) -> Session | None:
        with self._lock:
            session = self._sessions.get(session_id)
            if session is not None:
                self._sessions.move_to_end(session_id)
            return session


def create_app(capacity: int = DEFAULT_CAPACITY,
               solve_timeout: float = DEFAULT_SOLVE_TIMEOUT) -> FastAPI:
    app = FastAPI(title="feobn", version="0.1.0")
    # the browser UI is served from a separate static origin
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    store = SessionStore(capacity)
    executor = ThreadPoolExecutor(max_workers=4)

    @app.exception_handler(FeobnError)
    async def _feobn_error(_req: Request, err: FeobnError):
        return _problem(400, err.code, str(err))

    @app.exception_handler(RequestValidationError)
    async def _bad_request(_req: Request, err: RequestValidationError):
        return _problem(400, "bad-request", str(err.errors()[:3]))

    @app.get("/v1/fixtures")
    def list_fixtures():
        return {
            "fixtures": [
                {"name": n, "description": fixture_mod.load_fixture(n).description}
                for n in fixture_mod.fixture_names()
            ]
        }

    @app.post("/v1/sessions", status_code=201)
    async def create_session(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _problem(400, "bad-request", "body must be JSON")
        try:
            if "fixture" in body:
                bundle = fixture_mod.load_fixture(body["fixture"])
                scenario = bundle.scenario()
                constraints = list(bundle.constraints or [])
            else:
                if "network" not in body or "roles" not in body:
                    return _problem(400, "bad-request", "need fixture or network+roles")
                network = build_network(body["network"])
                roles = RoleAssignment.from_document(body["roles"])
                free = fixture_mod.free_entries_from_document(network, body["roles"])
                scenario = assign_roles(network, roles, free)
                constraints = list(body.get("constraints", []))
            _validate_constraints(constraints, scenario)
        except KeyError as err:
            return _problem(400, "bad-request", str(err))
        except FeobnError as err:
            return _problem(400, err.code, str(err))
        session = Session(id=uuid.uuid4().hex, scenario=scenario, constraints=constraints)
        store.put(session)
        return {"id": session.id, "revision": session.revision}

    def _get(session_id: str) -> Session | None:
        return store.get(session_id)

    @app.get("/v1/sessions/{session_id}/tables")
    def get_tables(session_id: str):
        session = _get(session_id)
        if session is None:
            return _problem(404, "unknown-session", session_id)
        with session.lock:
            pre = feo_table(session.scenario)
            out = {
                "revision": session.revision,
                "pre": {"rows": _table_json(pre),
                        "deviation": feo_deviation(session.scenario, pre)},
                "post": None,
                "solution_status": None,
            }
            if session.solution is not None and session.solution_revision == session.revision:
                post_scenario = assign_roles(session.corrected, session.scenario.roles)
                post = feo_table(post_scenario)
                out["post"] = {"rows": _table_json(post),
                               "deviation": feo_deviation(post_scenario, post),
                               "revision": session.solution_revision}
                out["solution_status"] = session.solution.status
            return out

    @app.put("/v1/sessions/{session_id}/constraints")
    async def put_constraints(session_id: str, request: Request):
        session = _get(session_id)
        if session is None:
            return _problem(404, "unknown-session", session_id)
        try:
            body = await request.json()
        except Exception:
            return _problem(400, "bad-request", "body must be JSON")
        constraints = body.get("constraints", [])
        try:
            _validate_constraints(constraints, session.scenario)
        except FeobnError as err:
            return _problem(400, err.code, str(err))
        with session.lock:
            expected = body.get("expected_revision")
            if expected is not None and expected != session.revision:
                return _problem(409, "stale-revision",
                                f"expected {expected}, session is at {session.revision}")
            session.constraints = list(constraints)
            session.revision += 1
            session.invalidate()
            return {"revision": session.revision}

    @app.post("/v1/sessions/{session_id}/solve")
    async def post_solve(session_id: str, request: Request):
        session = _get(session_id)
        if session is None:
            return _problem(404, "unknown-session", session_id)
        body = await request.json() if await _has_body(request) else {}
        mode = body.get("mode", "auto")
        if mode not in ("auto", "exact", "closest"):
            return _problem(400, "bad-request", f"unknown mode {mode!r}")
        with session.lock:
            revision = session.revision

            def work():
                index = enumerate_free_parameters(session.scenario)
                system = build_feo_system(session.scenario, index)
                if session.constraints:
                    system = add_feasibility_constraints(system, session.constraints)
                solution = solve_system(system, mode)
                return index, system, solution

            future = executor.submit(work)
            try:
                index, system, solution = future.result(timeout=solve_timeout)
            except FutureTimeout:
                return _problem(504, "solve-timeout", f"exceeded {solve_timeout}s")
            except InfeasibleConstraints as err:
                return _problem(409, err.code, str(err), conflicts=err.conflicts)
            except FeobnError as err:
                return _problem(400, err.code, str(err))
            if solution is None:
                return _problem(409, "no-exact-solution",
                                "no CPT satisfies every constraint exactly; "
                                "retry with mode=closest or auto")
            session.solution = solution
            session.solution_revision = revision
            session.corrected = apply_solution(session.scenario, solution, index)
            report = solution.report(system)
            report["revision"] = revision
            return report

    @app.get("/v1/sessions/{session_id}/sample")
    def get_sample(session_id: str, count: int, seed: int):
        session = _get(session_id)
        if session is None:
            return _problem(404, "unknown-session", session_id)
        if not (1 <= count <= MAX_SAMPLE_COUNT):
            return _problem(400, "bad-count", f"count must be in [1, {MAX_SAMPLE_COUNT}]")
        with session.lock:
            if session.solution is None or session.solution_revision != session.revision:
                return _problem(409, "no-solution",
                                "solve against the current constraints before sampling")
            data = sample(session.corrected, SampleRequest(count=count, seed=seed))
        return PlainTextResponse(_to_csv(data), media_type="text/csv")

    return app


def _to_csv(data: Dataset) -> str:
    lines = [",".join(c.name for c in data.columns)]
    lines.extend(",".join(map(str, rec)) for rec in data.records)
    return "\n".join(lines) + "\n"


async def _has_body(request: Request) -> bool:
    body = await request.body()
    return bool(body)


def _validate_constraints(constraints: list, scenario: FeoScenario | None = None) -> None:
    from .network import check_assignment

    for c in constraints:
        if "event" not in c or not isinstance(c["event"], dict) or not c["event"]:
            raise InfeasibleConstraints("constraint is missing its event")
        if scenario is not None:
            try:
                check_assignment(scenario.network, c["event"])
            except KeyError as exc:
                raise InfeasibleConstraints(f"constraint event is malformed: {exc}")
        op = c.get("op", "eq")
        if op == "interval":
            low, high = float(c["low"]), float(c["high"])
            if low > high:
                raise InfeasibleConstraints(f"empty interval [{low}, {high}]")
            bounds = (low, high)
        elif op in ("eq", "le", "ge"):
            bounds = (float(c["value"]),)
        else:
            raise InfeasibleConstraints(f"unknown constraint op {op!r}")
        for bound in bounds:
            if not (0.0 <= bound <= 1.0):
                raise InfeasibleConstraints(f"bound {bound} outside [0, 1]")


app = create_app()
