//! Small shared helpers for the command layer.

use std::path::Path;

use dac_core::error::Result;

/// Applies `f` to every item on up to `threads` workers and returns results
/// in input order. Each item's computation must be self-contained, so the
/// output is identical for any thread count.
pub fn parallel_map_ordered<T, R, F>(items: Vec<T>, threads: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    let n = items.len();
    let threads = threads.max(1).min(n.max(1));
    if threads <= 1 {
        return items.into_iter().map(f).collect();
    }
    let chunk_size = n.div_ceil(threads);
    let mut indexed: Vec<(usize, T)> = items.into_iter().enumerate().collect();
    let mut chunks: Vec<Vec<(usize, T)>> = Vec::new();
    while !indexed.is_empty() {
        let take = chunk_size.min(indexed.len());
        chunks.push(indexed.drain(..take).collect());
    }

    let mut results: Vec<Option<R>> = Vec::new();
    results.resize_with(n, || None);
    let f = &f;
    std::thread::scope(|scope| {
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|chunk| {
                scope.spawn(move || {
                    chunk
                        .into_iter()
                        .map(|(i, item)| (i, f(item)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for handle in handles {
            for (i, r) in handle.join().expect("worker panicked") {
                results[i] = Some(r);
            }
        }
    });
    results.into_iter().map(|r| r.unwrap()).collect()
}

/// Writes a file, creating parent directories as needed.
pub fn write_output(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_map_preserves_order() {
        let items: Vec<usize> = (0..103).collect();
        let seq = parallel_map_ordered(items.clone(), 1, |x| x * 2);
        let par = parallel_map_ordered(items, 4, |x| x * 2);
        assert_eq!(seq, par);
        assert_eq!(seq[50], 100);
    }
}
