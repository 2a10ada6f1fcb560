# app/models/device.py
"""
Inertial Device Models Module

Builds ``InertialDevice`` records from the physical parameters of each device
kind. It follows the factory pattern: ``DeviceModel.create(kind, **params)``
returns the subclass that knows how a kind turns its parameters into an
inertia constant H and a damping D.

- synchronous condenser: real rotating inertia, no active power
- synchronous motor: real rotating inertia, consumes active power
- grid forming: emulated inertia from droop m_p and filter constant T_omega,
  H = T_omega / m_p and D = 1 / m_p
- grid following: no inertial response, injects power only
"""

import logging
from typing import Any, Dict, Optional

from app.core.errors import InvalidParameterError
from app.schemas.grid import DeviceKind, InertialDevice

logger = logging.getLogger(__name__)


class DeviceModel:
    """
    Base class for the device kinds.

    Subclasses implement ``inertia_constant``, ``damping`` and
    ``active_power``; ``build`` turns them into an ``InertialDevice``.
    """

    kind: DeviceKind

    def __init__(self, **params: float):
        self.params = params

    @classmethod
    def create(cls, kind: str, **params: Any) -> "DeviceModel":
        """
        Factory method returning the model for ``kind``.

        Raises:
            InvalidParameterError: unknown kind or inconsistent parameters
        """
        device_classes = {
            DeviceKind.SYNCHRONOUS_CONDENSER.value: SynchronousCondenser,
            DeviceKind.SYNCHRONOUS_MOTOR.value: SynchronousMotor,
            DeviceKind.GRID_FORMING.value: GridForming,
            DeviceKind.GRID_FOLLOWING.value: GridFollowing,
        }
        key = kind.value if isinstance(kind, DeviceKind) else str(kind).lower()
        device_class = device_classes.get(key)
        if not device_class:
            raise InvalidParameterError(f"Unsupported device kind: {kind}")
        model = device_class(**params)
        model.validate()
        return model

    def validate(self) -> None:
        for name, value in self.params.items():
            if value is not None and not isinstance(value, (int, float)):
                raise InvalidParameterError(f"{self.kind.value}: parameter {name} must be numeric")

    def inertia_constant(self) -> float:
        raise NotImplementedError

    def damping(self) -> float:
        return float(self.params.get("damping_D") or 0.0)

    def active_power(self) -> float:
        return float(self.params.get("p_inject") or 0.0)

    def build(
        self,
        device_id: int,
        bus: int,
        coupling_reactance: float,
        emf_setpoint: Optional[float] = None,
        q_inject: float = 0.0,
    ) -> InertialDevice:
        return InertialDevice(
            id=device_id,
            bus=bus,
            kind=self.kind,
            inertia_H=self.inertia_constant(),
            damping_D=self.damping(),
            coupling_reactance=coupling_reactance,
            p_inject=self.active_power(),
            q_inject=q_inject,
            emf_setpoint=emf_setpoint,
        )

    def __repr__(self):
        return f"<{type(self).__name__}(params={self.params})>"


class SynchronousCondenser(DeviceModel):
    """Unloaded synchronous machine: H and D as given, P = 0."""
    kind = DeviceKind.SYNCHRONOUS_CONDENSER

    def validate(self) -> None:
        super().validate()
        if not self.params.get("inertia_H") or self.params["inertia_H"] <= 0:
            raise InvalidParameterError("synchronous condenser needs inertia_H > 0")

    def inertia_constant(self) -> float:
        return float(self.params["inertia_H"])

    def active_power(self) -> float:
        return 0.0


class SynchronousMotor(DeviceModel):
    """Motor load with rotating mass; ``p_consumed`` is drawn from the bus."""
    kind = DeviceKind.SYNCHRONOUS_MOTOR

    def validate(self) -> None:
        super().validate()
        if not self.params.get("inertia_H") or self.params["inertia_H"] <= 0:
            raise InvalidParameterError("synchronous motor needs inertia_H > 0")

    def inertia_constant(self) -> float:
        return float(self.params["inertia_H"])

    def active_power(self) -> float:
        if "p_consumed" in self.params:
            return -abs(float(self.params["p_consumed"]))
        return float(self.params.get("p_inject") or 0.0)


class GridForming(DeviceModel):
    """
    Droop-controlled grid-forming inverter.

    Takes the droop gain ``m_p`` and either the filter time constant
    ``t_omega`` or the target ``inertia_H`` (then T_omega = H * m_p).
    """
    kind = DeviceKind.GRID_FORMING

    def validate(self) -> None:
        super().validate()
        m_p = self.params.get("m_p")
        if m_p is None:
            if not self.params.get("inertia_H") or self.params["inertia_H"] <= 0:
                raise InvalidParameterError("grid-forming device needs m_p or inertia_H > 0")
            return
        if m_p <= 0:
            raise InvalidParameterError(f"droop gain m_p must be positive, got {m_p}")
        has_t = self.params.get("t_omega") is not None
        has_h = self.params.get("inertia_H") is not None
        if has_t == has_h:
            raise InvalidParameterError("give exactly one of t_omega and inertia_H with m_p")
        if has_t and self.params["t_omega"] <= 0:
            raise InvalidParameterError("t_omega must be positive")

    def inertia_constant(self) -> float:
        if self.params.get("m_p") is not None and self.params.get("t_omega") is not None:
            return float(self.params["t_omega"]) / float(self.params["m_p"])
        return float(self.params["inertia_H"])

    def damping(self) -> float:
        m_p = self.params.get("m_p")
        if m_p is not None:
            return 1.0 / float(m_p)
        return super().damping()


class GridFollowing(DeviceModel):
    """Current-controlled inverter: power injection, no inertia."""
    kind = DeviceKind.GRID_FOLLOWING

    def validate(self) -> None:
        super().validate()
        if self.params.get("inertia_H"):
            raise InvalidParameterError("grid-following devices provide no inertia")

    def inertia_constant(self) -> float:
        return 0.0

    def damping(self) -> float:
        return 0.0


FACTORY_KEYS = ("m_p", "t_omega", "p_consumed")


def device_from_record(record: Dict[str, Any]) -> InertialDevice:
    """
    Turn a case-file device entry into an ``InertialDevice``.

    Entries that carry factory parameters (``m_p``, ``t_omega``,
    ``p_consumed``) go through the kind's model; plain entries are validated
    as they stand.
    """
    if not any(key in record for key in FACTORY_KEYS):
        return InertialDevice.model_validate(record)
    record = dict(record)
    fixed = {
        name: record.pop(name)
        for name in ("id", "bus", "kind", "coupling_reactance", "emf_setpoint", "q_inject")
        if name in record
    }
    model = DeviceModel.create(fixed.get("kind", ""), **record)
    logger.debug("device %s built from %r", fixed.get("id"), model)
    return model.build(
        device_id=fixed.get("id"),
        bus=fixed.get("bus"),
        coupling_reactance=fixed.get("coupling_reactance"),
        emf_setpoint=fixed.get("emf_setpoint"),
        q_inject=fixed.get("q_inject", 0.0),
    )
