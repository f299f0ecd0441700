package org.alpha.util;

import java.util.List;

/**
 * Small helpers for working with strings.
 */
public final class StringUtils {

    private static final String OPENER = "/** not a doc comment */";
    private static final String CLOSER = "*/ {";

    private StringUtils() {
    }

    /**
     * Returns true when the string is null or contains only whitespace.
     *
     * @param s the string to test
     * @return whether {@code s} is blank
     */
    public static boolean isBlank(String s) {
        return s == null || s.trim().isEmpty();
    }

    /**
     * Joins the parts with the given separator.
     *
     * @param sep separator placed between parts
     * @param parts the parts to join
     * @return the joined string, never null
     */
    public static String join(String sep, List<String> parts) {
        StringBuilder sb = new StringBuilder();
        for (int i = 0; i < parts.size(); i++) {
            if (i > 0) {
                sb.append(sep); // "}" in a comment
            }
            sb.append(parts.get(i));
        }
        return sb.toString();
    }

    /**
     * Repeats a string {@code n} times.
     *
     * @param s the string
     * @param n how often, must not be negative
     * @return the repeated string
     * @throws IllegalArgumentException if n is negative
     */
    public static String repeat(String s, int n) {
        if (n < 0) {
            throw new IllegalArgumentException("n < 0: \"" + n + "\" {");
        }
        return s.repeat(n);
    }
}
