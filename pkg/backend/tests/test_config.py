"""
Assembly and scenario documents: loading, schema errors and cross references.
"""

import copy
from pathlib import Path

import pytest

from backend.src.bpa import NextHop
from backend.src.bundle import parse_eid
from backend.src.harness import (
    AssemblyConfig,
    Environment,
    build_assembly,
    build_routing_table,
    check_assembly,
    load_assembly_config,
    load_scenario_config,
    parse_document,
)
from backend.src.harness.config import RouteConfig, format_path, load_toml
from backend.src.utils.errors import ConfigInvalid

from .support import ROOT

NODE_FILES = sorted((ROOT / "scenarios").glob("*/*.toml"))


@pytest.fixture
def node1(scenario_dir) -> dict:
    return load_toml(scenario_dir / "fig1" / "node1.toml")


def invalid_path(document: dict, daemon: bool = False) -> str:
    with pytest.raises(ConfigInvalid) as info:
        check_assembly(parse_document(AssemblyConfig, document), daemon=daemon)
    return info.value.path


# =============================================================================
# Assemblies
# =============================================================================


class TestAssemblyDocuments:
    @pytest.mark.parametrize("path", NODE_FILES, ids=lambda p: f"{p.parent.name}/{p.stem}")
    def test_shipped_assemblies_are_valid(self, path):
        config = load_assembly_config(path)
        assert config.instances

    def test_fig1_node1(self, scenario_dir):
        config = load_assembly_config(scenario_dir / "fig1" / "node1.toml")
        assert config.node == "node1"
        assert [instance.label for instance in config.instances] == ["scope1", "scope2"]
        assert config.aap_address("scope2") == "127.0.0.1:4212"
        assert config.wiring[0].registrations == ["dtn://lower1.dtn"]

    def test_unknown_route_cla(self, node1):
        node1["instances"][0]["routes"][0]["cla"] = "udp"
        assert invalid_path(node1) == "instances[0].routes[0].cla"

    def test_unknown_key(self, node1):
        node1["instances"][0]["bogus"] = 1
        assert invalid_path(node1) == "instances[0].bogus"

    def test_unknown_wiring_target(self, node1):
        node1["wiring"][0]["lower"] = "scope9"
        assert invalid_path(node1) == "wiring[0].lower"

    def test_bad_node_eid(self, node1):
        node1["instances"][0]["node_eids"] = ["ipn:one.0"]
        assert invalid_path(node1) == "instances[0].node_eids[0]"

    def test_duplicate_label(self, node1):
        node1["instances"].append(copy.deepcopy(node1["instances"][0]))
        assert invalid_path(node1) == "instances[2].label"

    def test_bad_bibe_address(self, node1):
        node1["instances"][0]["routes"][0]["address"] = "dtn://lower3.dtn"
        assert invalid_path(node1) == "instances[0].routes[0].address"

    def test_bad_route_pattern(self, node1):
        node1["instances"][0]["routes"][0]["dest"] = "ipn:x.*"
        assert invalid_path(node1) == "instances[0].routes[0].dest"

    def test_contact_must_end_after_start(self, node1):
        node1["instances"][1]["contacts"][0].update(start=2.0, end=1.0)
        assert invalid_path(node1) == "instances[1].contacts[0].end"

    def test_discovery_needs_a_stream_cla(self, node1):
        node1["instances"][0]["discovery"] = {"enabled": True, "cla": "bibe"}
        assert invalid_path(node1) == "instances[0].discovery.cla"

    def test_wiring_needs_a_bibe_cla(self, node1):
        node1["wiring"][0]["cla"] = "tcp"
        assert invalid_path(node1) == "wiring[0].cla"

    @pytest.mark.parametrize("name", ["node1", "node2", "node3"])
    def test_fig1_runs_on_sockets(self, scenario_dir, name):
        load_assembly_config(scenario_dir / "fig1" / f"{name}.toml", daemon=True)

    @pytest.mark.parametrize(
        "edit,path",
        [
            ((0, "aap", "node1/scope1"), "instances[0].aap"),
            ((1, "aap", None), "instances[1].aap"),
            ((0, "routes", "node1/scope2#dtn://lower3.dtn"), "instances[0].routes[0].address"),
            ((1, "routes", "node2.s2"), "instances[1].routes[0].address"),
            ((1, "contacts", "127.0.0.1"), "instances[1].contacts[0].address"),
            ((1, "clas", "127.0.0.1:port"), "instances[1].clas[0].listen"),
            ((1, "clas", "127.0.0.1:70000"), "instances[1].clas[0].listen"),
        ],
    )
    def test_daemon_needs_host_port_addresses(self, node1, edit, path):
        index, key, value = edit
        instance = node1["instances"][index]
        if key == "aap" and value is None:
            del instance["aap"]
        elif key == "aap":
            instance["aap"] = value
        elif key == "clas":
            instance["clas"][0]["listen"] = value
        else:
            instance[key][0]["address"] = value
        check_assembly(parse_document(AssemblyConfig, copy.deepcopy(node1)))
        assert invalid_path(node1, daemon=True) == path

    def test_register_key_is_read_into_registrations(self, node1):
        config = parse_document(AssemblyConfig, node1)
        assert config.wiring[0].registrations == ["dtn://lower1.dtn"]
        assert "register" not in type(config.wiring[0]).model_fields
        assert config.wiring[0].model_dump(by_alias=True)["register"] == ["dtn://lower1.dtn"]

    def test_missing_instances(self):
        assert invalid_path({"node": "x", "instances": []}) == "instances"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigInvalid) as info:
            load_assembly_config(tmp_path / "absent.toml")
        assert info.value.path == ""

    def test_toml_syntax_error(self, tmp_path):
        path = tmp_path / "broken.toml"
        path.write_text("node = \n")
        with pytest.raises(ConfigInvalid) as info:
            load_assembly_config(path)
        assert info.value.path == ""


class TestRoutingTableFromConfig:
    def test_default_and_entries(self):
        table = build_routing_table(
            [
                RouteConfig(dest="ipn:1.*", cla="tcp", address="a:1"),
                RouteConfig(dest="default", cla="tcp", address="gw:1"),
            ]
        )
        assert table.default == NextHop("tcp", "gw:1")
        assert table.lookup(parse_eid("ipn:1.4")) == NextHop("tcp", "a:1")
        assert table.lookup(parse_eid("ipn:9.0")) == NextHop("tcp", "gw:1")

    def test_format_path(self):
        assert format_path(("instances", 1, "routes", 0, "cla")) == "instances[1].routes[0].cla"


class TestBuildAssembly:
    def test_builds_instances_and_wiring(self, scenario_dir):
        config = load_assembly_config(scenario_dir / "fig2" / "node3.toml")
        assembly = build_assembly(config, Environment.virtual())
        assert assembly.labels == ["scope1", "scope2", "scope3"]
        assert sorted(assembly.servers) == ["scope1", "scope2", "scope3"]
        assert set(assembly.initial_digests) == {"scope1", "scope2", "scope3"}
        bibe = assembly.instance("scope1").clas["bibe"]
        assert sorted(bibe.describe()["lowers"]) == ["node3/scope2", "node3/scope3"]
        with pytest.raises(KeyError):
            assembly.instance("scope9")

    def test_discovery_agents(self, scenario_dir):
        config = load_assembly_config(scenario_dir / "redmars" / "chip.toml")
        assembly = build_assembly(config, Environment.virtual())
        assert list(assembly.discoveries) == ["mars"]
        assert assembly.instance("mars").discovery_enabled


# =============================================================================
# Scenarios
# =============================================================================


def write_scenario(tmp_path: Path, body: str) -> Path:
    fig1 = ROOT / "scenarios" / "fig1"
    assemblies = ", ".join(f'"{fig1 / f"node{n}.toml"}"' for n in (1, 2, 3))
    path = tmp_path / "scenario.toml"
    path.write_text(f'name = "t"\nduration = 5.0\nassemblies = [{assemblies}]\n{body}')
    return path


APPS = """
[[applications]]
name = "sender"
node = "node1"
instance = "scope1"

[[applications]]
name = "receiver"
node = "node3"
instance = "scope1"
register = "ipn:2.0"
"""


def scenario_error(tmp_path: Path, body: str) -> str:
    with pytest.raises(ConfigInvalid) as info:
        load_scenario_config(write_scenario(tmp_path, body))
    return info.value.path


class TestScenarioDocuments:
    @pytest.mark.parametrize("name", ["fig1", "fig2", "redmars-eval"])
    def test_shipped_scenarios_load(self, scenario_dir, name):
        scenario, assemblies = load_scenario_config(scenario_dir / f"{name}.toml")
        assert scenario.name == name
        assert len(assemblies) == len(scenario.assemblies)

    def test_fig1(self, scenario_dir):
        scenario, assemblies = load_scenario_config(scenario_dir / "fig1.toml")
        assert scenario.duration == 5.0 and scenario.seed == 2022
        assert sorted(assemblies) == ["node1", "node2", "node3"]
        assert [phase.action for phase in scenario.phases] == ["inject", "expect_delivery"]

    def test_minimal_scenario(self, tmp_path):
        scenario, _ = load_scenario_config(write_scenario(tmp_path, APPS))
        assert scenario.seed is None
        assert [app.name for app in scenario.applications] == ["sender", "receiver"]

    def test_unknown_application_node(self, tmp_path):
        body = '[[applications]]\nname = "a"\nnode = "node9"\ninstance = "scope1"\n'
        assert scenario_error(tmp_path, body) == "applications[0].node"

    def test_decreasing_phase_offsets(self, tmp_path):
        body = APPS + (
            '[[phases]]\nat = 2.0\naction = "radio"\na = "x"\nb = "y"\n'
            '[[phases]]\nat = 1.0\naction = "radio"\na = "x"\nb = "y"\n'
        )
        assert scenario_error(tmp_path, body) == "phases[1].at"

    def test_expectation_needs_earlier_inject(self, tmp_path):
        body = APPS + (
            '[[phases]]\nat = 1.0\naction = "expect_delivery"\napplication = "receiver"\n'
            'payload_of = "nothing"\ntimeout = 2.0\n'
        )
        assert scenario_error(tmp_path, body) == "phases[0].payload_of"

    def test_reconfigure_needs_a_multiplexer(self, tmp_path):
        body = '[[phases]]\nat = 1.0\naction = "reconfigure"\nprofile = "x"\n'
        assert scenario_error(tmp_path, body) == "phases[0].action"

    def test_inject_needs_a_payload(self, tmp_path):
        body = APPS + (
            '[[phases]]\nat = 1.0\naction = "inject"\napplication = "sender"\ndest = "ipn:2.0"\n'
        )
        assert scenario_error(tmp_path, body) == "phases[0].payload"

    def test_unknown_action(self, tmp_path):
        body = '[[phases]]\nat = 1.0\naction = "explode"\n'
        assert scenario_error(tmp_path, body) == "phases[0].action"

    def test_duplicate_node(self, tmp_path):
        node1 = ROOT / "scenarios" / "fig1" / "node1.toml"
        path = tmp_path / "scenario.toml"
        path.write_text(f'name = "t"\nduration = 1.0\nassemblies = ["{node1}", "{node1}"]\n')
        with pytest.raises(ConfigInvalid) as info:
            load_scenario_config(path)
        assert info.value.path == "assemblies[1]"

    def test_invalid_assembly_is_reported_with_its_index(self, tmp_path):
        (tmp_path / "bad.toml").write_text('node = "bad"\ninstances = []\n')
        path = tmp_path / "scenario.toml"
        path.write_text('name = "t"\nduration = 1.0\nassemblies = ["bad.toml"]\n')
        with pytest.raises(ConfigInvalid) as info:
            load_scenario_config(path)
        assert info.value.path == "assemblies[0]:instances"
