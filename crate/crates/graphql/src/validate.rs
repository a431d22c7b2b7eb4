//! Minimal schema validation: fields exist on their parent type and type
//! conditions name defined types. Argument and variable typing are not checked.

use crate::ast::*;
use crate::error::ValidationError;
use crate::schema::Schema;

/// Meta-fields that resolve without a schema definition.
pub fn is_meta_field(name: &str) -> bool {
    matches!(name, "__typename" | "__schema" | "__type")
}

pub fn validate(doc: &Document, schema: &Schema) -> Result<(), ValidationError> {
    for op in &doc.operations {
        let root = schema.root_type(op.kind).ok_or(ValidationError::MissingRoot(op.kind.as_str()))?;
        check_set(&op.selection_set, root, schema)?;
    }
    for frag in doc.fragments.values() {
        if !schema.is_composite(&frag.type_condition) {
            return Err(ValidationError::UnknownType(frag.type_condition.clone()));
        }
        check_set(&frag.selection_set, &frag.type_condition, schema)?;
    }
    Ok(())
}

/// Checks that `operation_name`, when given, selects an operation in `doc`.
pub fn select_operation<'d>(doc: &'d Document, operation_name: Option<&str>) -> Result<Option<&'d OperationDefinition>, ValidationError> {
    match operation_name {
        None => Ok(None),
        Some(name) => doc
            .operations
            .iter()
            .find(|o| o.name.as_deref() == Some(name))
            .map(Some)
            .ok_or_else(|| ValidationError::UnknownOperation(name.to_string())),
    }
}

fn check_set(set: &SelectionSet, parent: &str, schema: &Schema) -> Result<(), ValidationError> {
    for sel in &set.items {
        match sel {
            Selection::Field(f) => {
                if is_meta_field(&f.name) {
                    continue;
                }
                let def = schema.field(parent, &f.name).ok_or_else(|| ValidationError::UnknownField {
                    parent: parent.to_string(),
                    field: f.name.clone(),
                })?;
                match &f.selection_set {
                    Some(ss) => check_set(ss, def.ty.named(), schema)?,
                    None if schema.is_composite(def.ty.named()) => {
                        return Err(ValidationError::MissingSelection { parent: parent.to_string(), field: f.name.clone() })
                    }
                    None => {}
                }
            }
            Selection::InlineFragment(i) => {
                let ty = match &i.type_condition {
                    Some(tc) if !schema.is_composite(tc) => return Err(ValidationError::UnknownType(tc.clone())),
                    Some(tc) => tc.as_str(),
                    None => parent,
                };
                check_set(&i.selection_set, ty, schema)?;
            }
            Selection::FragmentSpread(_) => {}
        }
    }
    Ok(())
}
