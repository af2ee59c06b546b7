from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, List, Optional

from rest_framework import serializers

from Fractal_Zeta.utils import zeta_settings
from fractal_builders.families import FAMILIES
from zeta_engine.services import METHODS

from .services import parse_point


class RunConfigSerializer(serializers.Serializer):
    """Validated options shared by the study commands."""

    family = serializers.ChoiceField(choices=sorted(FAMILIES), required=False, allow_null=True)
    graph = serializers.CharField(required=False, allow_null=True, allow_blank=False)
    levels = serializers.IntegerField(min_value=1, default=3)
    order = serializers.IntegerField(min_value=0, default=8)
    budget = serializers.IntegerField(min_value=0, default=6)
    grid = serializers.ListField(child=serializers.CharField(), required=False, default=list)
    methods = serializers.ListField(child=serializers.ChoiceField(choices=METHODS), required=False, default=list)
    mode = serializers.ChoiceField(choices=['exact', 'float'], default='exact')
    out = serializers.CharField(required=False, allow_null=True)
    tol = serializers.FloatField(required=False, allow_null=True, min_value=0)
    quiet = serializers.BooleanField(default=False)

    def validate_order(self, value: int) -> int:
        cap = int(zeta_settings().get('SERIES_ORDER_CAP', 64))
        if value > cap:
            raise serializers.ValidationError(f"Series order is capped at {cap}")
        return value

    def validate_graph(self, value: Optional[str]) -> Optional[str]:
        if value and not Path(value).is_file():
            raise serializers.ValidationError(f"Edge-list file {value} does not exist")
        return value

    def validate_grid(self, value: List[str]) -> List[complex]:
        points = []
        for raw in value:
            try:
                points.append(parse_point(raw))
            except ValueError as exc:
                raise serializers.ValidationError(f"Bad grid point {raw!r}: {exc}") from exc
        return points

    def validate(self, attrs: Dict[str, Any]) -> Dict[str, Any]:
        if not attrs.get('family') and not attrs.get('graph'):
            raise serializers.ValidationError("Either a family or an edge-list graph is required")
        if attrs.get('family') and attrs.get('graph'):
            raise serializers.ValidationError("Pass a family or a graph, not both")
        if not attrs.get('out'):
            attrs['out'] = str(zeta_settings().get('OUTPUT_DIR', 'runs'))
        return attrs
