"""Event ontology: main types, subtypes, argument roles, and prompt templates.

The ontology is data, not code: a schema file carries the type hierarchy
plus the natural-language templates used inside prompts. Templates mark the
answer position with the literal placeholder ``[MASK_SLOT]``, which prompt
builders replace with a backend sentinel token at build time. The canonical
full-scale ontology has 8 main types, 33 subtypes and 35 roles, but nothing
here hard-codes those counts; small synthetic schemas are first-class.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import SchemaError

# Placeholder in schema templates; replaced by a sentinel token at prompt-build time.
MASK_SLOT = "[MASK_SLOT]"

# Canonical coarse event types of the full-scale ontology, in canonical order.
ACE_MAIN_TYPES = (
    "Movement",
    "Personnel",
    "Conflict",
    "Contact",
    "Life",
    "Transaction",
    "Justice",
    "Business",
)


@dataclass(frozen=True)
class EventSubtype:
    """Fine-grained event type with its trigger statement template.

    ``trigger_question_template`` describes the event in natural language with
    exactly one ``[MASK_SLOT]`` marking where the trigger word belongs.
    """

    name: str
    parent: str
    trigger_question_template: str


@dataclass(frozen=True)
class ArgumentRole:
    """Argument role bound to one subtype, with a guideline-style description.

    ``description_template`` contains exactly one ``[MASK_SLOT]`` marking where
    the argument text belongs. Real deployments substitute annotation-guideline
    sentences here; shipped schemas carry synthetic stand-ins.
    """

    name: str
    event_subtype: str
    description_template: str


@dataclass(frozen=True)
class Schema:
    """Immutable event ontology. Safe for unrestricted concurrent reads."""

    main_types: tuple[str, ...]
    subtypes: tuple[EventSubtype, ...]
    roles: tuple[ArgumentRole, ...]

    def subtype(self, name: str) -> EventSubtype:
        for st in self.subtypes:
            if st.name == name:
                return st
        raise SchemaError(f"unknown subtype: {name!r}")

    def subtypes_of(self, main_type: str) -> list[EventSubtype]:
        if main_type not in self.main_types:
            raise SchemaError(f"unknown main type: {main_type!r}")
        return [st for st in self.subtypes if st.parent == main_type]


def _require_one_mask_slot(template: str, owner: str) -> None:
    n = template.count(MASK_SLOT)
    if n != 1:
        raise SchemaError(
            f"{owner}: template must contain exactly one mask slot, found {n}: {template!r}"
        )


def _validate(schema: Schema) -> Schema:
    if len(set(schema.main_types)) != len(schema.main_types):
        raise SchemaError("duplicate main type names")
    seen_subtypes = set()
    for st in schema.subtypes:
        if st.name in seen_subtypes:
            raise SchemaError(f"duplicate subtype name: {st.name!r}")
        seen_subtypes.add(st.name)
        if st.parent not in schema.main_types:
            raise SchemaError(f"subtype {st.name!r} references unknown main type {st.parent!r}")
        _require_one_mask_slot(st.trigger_question_template, f"subtype {st.name!r}")
    seen_roles = set()
    for role in schema.roles:
        key = (role.name, role.event_subtype)
        if key in seen_roles:
            raise SchemaError(f"duplicate role {role.name!r} for subtype {role.event_subtype!r}")
        seen_roles.add(key)
        if role.event_subtype not in seen_subtypes:
            raise SchemaError(
                f"role {role.name!r} references unknown subtype {role.event_subtype!r}"
            )
        _require_one_mask_slot(role.description_template, f"role {role.name!r}")
    return schema


def schema_from_dict(data: dict) -> Schema:
    """Build and validate a Schema from the file-format dictionary."""
    try:
        main_types = tuple(str(m) for m in data["main_types"])
        subtypes = tuple(
            EventSubtype(
                name=str(s["name"]),
                parent=str(s["parent"]),
                trigger_question_template=str(s["trigger_question_template"]),
            )
            for s in data["subtypes"]
        )
        roles = tuple(
            ArgumentRole(
                name=str(r["name"]),
                event_subtype=str(r["event_subtype"]),
                description_template=str(r["description_template"]),
            )
            for r in data["roles"]
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed schema data: {exc}") from exc
    return _validate(Schema(main_types=main_types, subtypes=subtypes, roles=roles))


def schema_to_dict(schema: Schema) -> dict:
    return {
        "main_types": list(schema.main_types),
        "subtypes": [
            {
                "name": st.name,
                "parent": st.parent,
                "trigger_question_template": st.trigger_question_template,
            }
            for st in schema.subtypes
        ],
        "roles": [
            {
                "name": r.name,
                "event_subtype": r.event_subtype,
                "description_template": r.description_template,
            }
            for r in schema.roles
        ],
    }


def load_schema(path: str | Path) -> Schema:
    """Load and validate a schema file (UTF-8 JSON, see schema_to_dict for keys)."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot parse schema file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise SchemaError(f"schema file {path} must hold a JSON object")
    return schema_from_dict(data)


def save_schema(schema: Schema, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema_to_dict(schema), fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def roles_for(schema: Schema, subtype: EventSubtype | str) -> list[ArgumentRole]:
    """Roles declared for a subtype, in schema-file order. May be empty."""
    name = subtype.name if isinstance(subtype, EventSubtype) else subtype
    schema.subtype(name)  # raises on unknown subtype
    return [r for r in schema.roles if r.event_subtype == name]


def main_type_of(schema: Schema, subtype: EventSubtype | str) -> str:
    """Parent main type of a subtype."""
    name = subtype.name if isinstance(subtype, EventSubtype) else subtype
    return schema.subtype(name).parent
