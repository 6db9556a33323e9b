"""
Route module initialization file that exports all routers.
"""

from fastapi import APIRouter

from .node_route import router as node_router

# Main router that includes all sub-routers
api_router = APIRouter()

api_router.include_router(node_router)

__all__ = ["api_router"]
