"""
Read-only management routes of a running node.
"""

from typing import Any, Dict, List, Optional

from fastapi import APIRouter, Depends, HTTPException, Query, Request, status
from pydantic import BaseModel
from sqlalchemy import func, select

from ..bundle import AuditLog
from ..db.database import get_db
from ..db.models import StoredBundle
from ..harness.assembly import NodeAssembly

router = APIRouter(tags=["node"])


class InstanceSummary(BaseModel):
    """Schema for one BPA instance in the node overview."""

    scope: str
    node_eids: List[str]
    route_digest: str
    registrations: List[str]
    stored: int
    discovery: bool


class NodeResponse(BaseModel):
    """Schema for the node overview."""

    node: str
    running: bool
    instances: List[InstanceSummary]


class AuditEventResponse(BaseModel):
    """Schema for one audit event."""

    time: float
    seq: int
    node: str
    scope: str
    kind: str
    digest: str = ""
    bundle_id: Optional[str] = None
    related: Optional[str] = None
    detail: str = ""


def get_assembly(request: Request) -> NodeAssembly:
    """
    Raises:
        HTTPException: 503 when the app was created without a node
    """
    assembly = getattr(request.app.state, "assembly", None)
    if assembly is None:
        raise HTTPException(
            status_code=status.HTTP_503_SERVICE_UNAVAILABLE, detail="No node is running"
        )
    return assembly


def get_audit_log(request: Request) -> AuditLog:
    audit = getattr(request.app.state, "audit", None)
    if audit is None:
        raise HTTPException(
            status_code=status.HTTP_503_SERVICE_UNAVAILABLE, detail="No audit log attached"
        )
    return audit


@router.get("/node", response_model=NodeResponse)
async def get_node(assembly: NodeAssembly = Depends(get_assembly)) -> Dict[str, Any]:
    """
    Overview of the node and its instances.

    Returns:
        - 200 OK: Node name, running flag and one summary per instance
        - 503 Service Unavailable: If no node is attached to the app
    """
    return {
        "node": assembly.node,
        "running": assembly.running,
        "instances": [
            {
                "scope": instance.scope,
                "node_eids": [str(eid) for eid in instance.node_eids],
                "route_digest": instance.route_digest(),
                "registrations": sorted(str(eid) for eid in instance.registry.endpoints()),
                "stored": len(instance.store),
                "discovery": instance.discovery_enabled,
            }
            for instance in assembly.instances
        ],
    }


@router.get("/node/instances/{label}")
async def get_instance(
    label: str, assembly: NodeAssembly = Depends(get_assembly)
) -> Dict[str, Any]:
    """
    Full snapshot of one instance: routes, store depths and CLA state.

    Returns:
        - 200 OK: Instance snapshot
        - 404 Not Found: If the node has no instance with this scope label
    """
    try:
        return assembly.instance(label).snapshot()
    except KeyError:
        raise HTTPException(
            status_code=status.HTTP_404_NOT_FOUND, detail=f"No instance {label!r}"
        )


@router.get("/node/audit", response_model=List[AuditEventResponse])
async def get_audit(
    limit: int = Query(100, ge=1, le=10_000),
    scope: Optional[str] = None,
    audit: AuditLog = Depends(get_audit_log),
) -> List[Dict[str, Any]]:
    """
    Most recent audit events, oldest first.

    Query Parameters:
        - limit: Number of events (1-10000, default 100)
        - scope: Only events of this scope label
    """
    events = audit.select(scope=scope)[-limit:]
    return [
        {
            "time": event.time,
            "seq": event.seq,
            "node": event.node,
            "scope": event.scope,
            "kind": event.kind.value,
            "digest": event.digest,
            "bundle_id": event.bundle_id,
            "related": event.related,
            "detail": event.detail,
        }
        for event in events
    ]


@router.get("/node/spill", response_model=Dict[str, int])
async def get_spill_depths(
    assembly: NodeAssembly = Depends(get_assembly), db=Depends(get_db)
) -> Dict[str, int]:
    """
    Bundles held in the spill-to-disk store, per scope label of this node.

    Returns:
        - 200 OK: Mapping scope label -> stored bundle count (spilling scopes only)
    """
    rows = db.execute(
        select(StoredBundle.scope, func.count(StoredBundle.id))
        .where(StoredBundle.node == assembly.node)
        .group_by(StoredBundle.scope)
    ).all()
    return {scope: count for scope, count in rows}
