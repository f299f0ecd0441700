package org.alpha.annotations;

import java.util.List;

/**
 * Dispatches events to registered callbacks.
 */
@Deprecated
@SuppressWarnings({"rawtypes", "unchecked"})
public class Handler extends Base implements Runnable {

    private final List callbacks;

    /**
     * Creates a handler over the given callbacks.
     *
     * @param callbacks callbacks to dispatch to
     */
    @SuppressWarnings("unused")
    public Handler(List callbacks) {
        this.callbacks = callbacks;
    }

    /**
     * Runs every callback once, in registration order.
     */
    @Override
    public void run() {
        for (Object c : callbacks) {
            ((Runnable) c).run();
        }
    }

    /**
     * Dispatches the named event.
     *
     * @param name the event name
     * @return number of callbacks invoked
     */
    @Marker(
        value = "dispatch",
        priority = 2
    )
    @Override
    public int dispatch(String name) {
        run();
        return callbacks.size();
    }

    /**
     * Too many annotation lines separate this comment from its method.
     */
    @A
    @B
    @C
    @D
    @E
    @F
    public void overAnnotated() {
        run();
    }
}
