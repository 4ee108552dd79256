//! Netlist files: a schema-versioned JSON document and a logic-text listing.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use warplut_core::Netlist;

pub const NETLIST_SCHEMA: &str = "warplut-netlist";
pub const NETLIST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetlistFormat {
    Json,
    LogicText,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetlistDoc {
    schema: String,
    version: u32,
    netlist: Netlist,
}

#[derive(Debug, thiserror::Error)]
pub enum NetlistIoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

pub fn netlist_to_json(netlist: &Netlist) -> String {
    let doc = NetlistDoc {
        schema: NETLIST_SCHEMA.into(),
        version: NETLIST_VERSION,
        netlist: netlist.clone(),
    };
    serde_json::to_string(&doc).expect("netlist serializes")
}

pub fn netlist_from_json(text: &str) -> Result<Netlist, String> {
    let doc: NetlistDoc = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if doc.schema != NETLIST_SCHEMA || doc.version != NETLIST_VERSION {
        return Err(format!(
            "unsupported netlist schema {} v{} (expected {NETLIST_SCHEMA} v{NETLIST_VERSION})",
            doc.schema, doc.version
        ));
    }
    Ok(doc.netlist)
}

pub fn write_netlist(path: &Path, netlist: &Netlist, format: NetlistFormat) -> Result<(), NetlistIoError> {
    let text = match format {
        NetlistFormat::Json => netlist_to_json(netlist),
        NetlistFormat::LogicText => netlist.to_logic_text(),
    };
    fs::write(path, text).map_err(|source| NetlistIoError::Io {
        path: path.into(),
        source,
    })
}

pub fn read_netlist(path: &Path) -> Result<Netlist, NetlistIoError> {
    let text = fs::read_to_string(path).map_err(|source| NetlistIoError::Io {
        path: path.into(),
        source,
    })?;
    netlist_from_json(&text).map_err(|msg| NetlistIoError::Format {
        path: path.into(),
        msg,
    })
}
