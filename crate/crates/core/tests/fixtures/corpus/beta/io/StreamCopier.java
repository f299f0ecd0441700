package org.beta.io;

import java.io.IOException;
import java.io.InputStream;
import java.io.OutputStream;

/**
 * Copies bytes between streams using a fixed-size buffer.
 */
public class StreamCopier {

    /** Default buffer size in bytes. */
    public static final int DEFAULT_BUFFER = 8192;

    static {
        System.setProperty("copier.loaded", "true");
    }

    private final byte[] buffer;

    /**
     * Creates a copier with the default buffer size.
     */
    public StreamCopier() {
        this(DEFAULT_BUFFER);
    }

    /**
     * Creates a copier with a custom buffer size.
     *
     * @param size buffer size in bytes, must be positive
     */
    public StreamCopier(int size) {
        this.buffer = new byte[size];
    }

    /**
     * Copies all remaining bytes from {@code in} to {@code out}.
     *
     * @param in source stream
     * @param out destination stream
     * @return number of bytes copied
     * @throws IOException if either stream fails
     */
    public long copy(InputStream in, OutputStream out) throws IOException {
        long total = 0;
        int n;
        while ((n = in.read(buffer)) != -1) {
            out.write(buffer, 0, n);
            total += n;
        }
        return total;
    }
}
