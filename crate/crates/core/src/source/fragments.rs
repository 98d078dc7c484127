use super::{FileModel, Fragment};

/// Slices a file into windows of `window` lines starting every `stride` lines.
///
/// The last window may be shorter. Windows that would start past the end of the
/// file, or that are fully covered by the previous window, are not emitted.
pub fn slice_fragments(file: &FileModel, source: &str, window: usize, stride: usize) -> Vec<Fragment> {
    assert!(window >= 1 && stride >= 1, "window and stride must be positive");
    let lines: Vec<&str> = source.lines().collect();
    let mut out = Vec::new();
    let mut offset = 0;
    while offset < lines.len() {
        let end = (offset + window).min(lines.len());
        out.push(Fragment {
            path: file.path.clone(),
            start_line: offset + 1,
            end_line: end,
            text: lines[offset..end].join("\n"),
        });
        if end == lines.len() {
            break;
        }
        offset += stride;
    }
    out
}
