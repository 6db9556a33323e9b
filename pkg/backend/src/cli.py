"""
Command line front end: ``python -m backend.src {node,send,recv,scenario}``.

Exit codes: 0 success, 1 expectation failure or refused request,
2 invalid configuration, 3 connection failure, 4 malformed EID,
5 isolation audit FAIL (takes precedence over 1).
"""

import argparse
import asyncio
import sys
from pathlib import Path
from typing import Optional, Sequence

from .bpa import AapClient, AapMessage, AapMessageType
from .bundle import EndpointId, parse_eid
from .harness.assembly import Environment, build_assembly
from .harness.config import AssemblyConfig, load_assembly_config
from .harness.scenario import run_scenario_file
from .transport import TcpNetwork
from .utils.config import app_settings
from .utils.errors import ConfigInvalid, MalformedEid
from .utils.logger import app_logger

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_CONNECTION = 3
EXIT_EID = 4
EXIT_AUDIT = 5

REQUEST_TIMEOUT = 10.0


def _config_error(exc: ConfigInvalid) -> int:
    print(f"invalid configuration: {exc}", file=sys.stderr)
    return EXIT_CONFIG


# node


async def _serve(config: AssemblyConfig, http: bool) -> None:
    loop = asyncio.get_running_loop()
    env = Environment.daemon(loop)
    assembly = build_assembly(config, env)
    assembly.open_endpoints()
    if isinstance(env.network, TcpNetwork):
        await env.network.wait_listening()
    assembly.start_instances()
    try:
        if http:
            import uvicorn

            from .main import create_app

            server = uvicorn.Server(
                uvicorn.Config(
                    create_app(assembly, env.audit),
                    host=app_settings.HTTP_HOST,
                    port=app_settings.HTTP_PORT,
                    log_level=app_settings.LOG_LEVEL.lower(),
                )
            )
            await server.serve()
        else:
            await asyncio.Event().wait()
    finally:
        assembly.stop()


def cmd_node(args: argparse.Namespace) -> int:
    try:
        config = load_assembly_config(args.config, daemon=True)
    except ConfigInvalid as exc:
        return _config_error(exc)
    if args.dry_run:
        labels = ", ".join(instance.label for instance in config.instances)
        print(f"{config.node}: configuration valid ({labels})")
        return EXIT_OK
    try:
        asyncio.run(_serve(config, args.http))
    except KeyboardInterrupt:
        app_logger.info("Interrupted")
    except OSError as exc:
        app_logger.error(f"Node failed: {exc}")
        return EXIT_CONNECTION
    return EXIT_OK


# send / recv


def _read_payload(args: argparse.Namespace) -> bytes:
    if args.payload_file:
        if args.payload_file == "-":
            return sys.stdin.buffer.read()
        return Path(args.payload_file).read_bytes()
    if args.payload is not None:
        return args.payload.encode("utf-8")
    return sys.stdin.buffer.read()


async def _request(client: AapClient, issue) -> Optional[AapMessage]:
    loop = asyncio.get_running_loop()
    future: asyncio.Future = loop.create_future()

    def done(response: Optional[AapMessage]) -> None:
        if not future.done():
            future.set_result(response)

    issue(done)
    try:
        return await asyncio.wait_for(future, REQUEST_TIMEOUT)
    except asyncio.TimeoutError:
        return None


async def _send(address: str, dest: EndpointId, payload: bytes, count: int, lifetime_ms: int) -> int:
    client = AapClient(TcpNetwork(asyncio.get_running_loop()), address)
    try:
        for _ in range(count):
            response = await _request(
                client, lambda done: client.send(dest, payload, lifetime_ms, done)
            )
            if response is None:
                print(f"cannot reach AAP endpoint {address}", file=sys.stderr)
                return EXIT_CONNECTION
            if response.msg_type != AapMessageType.SENDCONFIRM:
                print(f"bundle to {dest} refused", file=sys.stderr)
                return EXIT_FAILED
            print(client.bundle_id_text(response))
    finally:
        client.close()
    return EXIT_OK


def cmd_send(args: argparse.Namespace) -> int:
    try:
        dest = parse_eid(args.dest)
    except MalformedEid as exc:
        print(f"malformed destination: {exc}", file=sys.stderr)
        return EXIT_EID
    payload = _read_payload(args)
    return asyncio.run(_send(args.aap, dest, payload, args.count, args.lifetime))


def _show(source: EndpointId, payload: bytes) -> None:
    text = payload.decode("utf-8", errors="replace")
    print(f"{source}\t{len(payload)}\t{text}", flush=True)


async def _recv(address: str, eid: EndpointId, count: Optional[int]) -> int:
    loop = asyncio.get_running_loop()
    finished: asyncio.Future = loop.create_future()
    received = 0

    def on_bundle(source: EndpointId, payload: bytes) -> None:
        nonlocal received
        _show(source, payload)
        received += 1
        if count is not None and received >= count and not finished.done():
            finished.set_result(EXIT_OK)

    def on_closed(reason: Optional[Exception]) -> None:
        if not finished.done():
            finished.set_result(EXIT_CONNECTION)

    client = AapClient(
        TcpNetwork(loop), address, on_bundle=on_bundle, on_closed=on_closed
    )
    response = await _request(client, lambda done: client.register(eid, done))
    if response is None:
        print(f"cannot reach AAP endpoint {address}", file=sys.stderr)
        client.close()
        return EXIT_CONNECTION
    if response.msg_type != AapMessageType.ACK:
        print(f"registration of {eid} refused", file=sys.stderr)
        client.close()
        return EXIT_FAILED
    app_logger.info(f"Registered {eid} at {address}")
    try:
        return await finished
    finally:
        client.close()


def cmd_recv(args: argparse.Namespace) -> int:
    try:
        eid = parse_eid(args.register)
    except MalformedEid as exc:
        print(f"malformed endpoint: {exc}", file=sys.stderr)
        return EXIT_EID
    try:
        return asyncio.run(_recv(args.aap, eid, args.count))
    except KeyboardInterrupt:
        return EXIT_OK


# scenario


def cmd_scenario(args: argparse.Namespace) -> int:
    try:
        report = run_scenario_file(
            args.script,
            seed=args.seed,
            wall_clock=args.wall_clock,
            inject_leak=args.inject_leak,
            report_dir=args.report,
        )
    except ConfigInvalid as exc:
        return _config_error(exc)
    print(report.summary(), end="")
    return report.exit_code()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scopestack", description="Recursive, scope-isolated DTN node and scenario harness"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    node = commands.add_parser("node", help="run a node daemon from an assembly config")
    node.add_argument("--config", required=True, help="assembly TOML file")
    node.add_argument("--dry-run", action="store_true", help="validate the config and exit")
    node.add_argument("--http", action="store_true", help="also serve the management API")
    node.set_defaults(handler=cmd_node)

    send = commands.add_parser("send", help="submit a bundle through AAP")
    send.add_argument("payload", nargs="?", help="payload text (default: stdin)")
    send.add_argument("--aap", default=app_settings.AAP_ADDRESS, help="AAP endpoint host:port")
    send.add_argument("--dest", required=True, help="destination EID")
    send.add_argument("--payload-file", help="read the payload from a file, '-' for stdin")
    send.add_argument("--count", type=int, default=1, help="number of bundles to send")
    send.add_argument("--lifetime", type=int, default=0, help="lifetime in ms (0: node default)")
    send.set_defaults(handler=cmd_send)

    recv = commands.add_parser("recv", help="register an endpoint and print deliveries")
    recv.add_argument("--aap", default=app_settings.AAP_ADDRESS, help="AAP endpoint host:port")
    recv.add_argument("--register", required=True, help="endpoint to register")
    recv.add_argument("--count", type=int, help="exit after this many deliveries")
    recv.set_defaults(handler=cmd_recv)

    scenario = commands.add_parser("scenario", help="run a scenario and audit it")
    scenario.add_argument("script", help="scenario TOML file")
    scenario.add_argument("--report", help="directory for report.json, summary.txt, audit.jsonl")
    scenario.add_argument("--seed", type=int, help="override the scenario seed")
    scenario.add_argument("--wall-clock", action="store_true", help="run in real time")
    scenario.add_argument(
        "--inject-leak",
        action="store_true",
        help="let lower instances parse carried bundles (auditor check)",
    )
    scenario.set_defaults(handler=cmd_scenario)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.handler(args)
